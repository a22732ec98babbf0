#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace occseg {

// Directed s-t network. Inner nodes are 0..inner_nodes-1; the source and sink
// take the two ids after them.
struct CutGraph {
    struct Arc {
        int from;
        int to;
        double capacity;
    };

    int inner_nodes = 0;
    std::vector<Arc> arcs;

    int source() const { return inner_nodes; }
    int sink() const { return inner_nodes + 1; }
    int node_count() const { return inner_nodes + 2; }

    int add_node() { return inner_nodes++; }

    void add_arc(int from, int to, double capacity) {
        if (capacity < 0)
            throw ArgumentError("CutGraph: negative capacity");
        if (capacity > 0)
            arcs.push_back({from, to, capacity});
    }
};

struct MinCut {
    double flow = 0;
    std::vector<bool> source_side;  // per inner node
};

namespace detail {

// Augmenting-path max-flow with two search trees grown from the terminals and
// reused between augmentations (the Boykov-Kolmogorov scheme). Terminal
// residuals live on the nodes: tr_cap > 0 is spare source->node capacity,
// tr_cap < 0 is spare node->sink capacity.
class TwoTreeMaxflow {
public:
    explicit TwoTreeMaxflow(int nodes) : nodes_(static_cast<std::size_t>(nodes)) {}

    void add_terminal(int i, double cap_source, double cap_sink) {
        Node& n = nodes_[i];
        double delta = n.tr_cap;
        if (delta > 0)
            cap_source += delta;
        else
            cap_sink -= delta;
        flow_ += std::min(cap_source, cap_sink);
        n.tr_cap = cap_source - cap_sink;
    }

    void add_edge(int i, int j, double cap, double rev_cap) {
        const int a = static_cast<int>(arcs_.size());
        arcs_.push_back({j, nodes_[i].first, a + 1, cap});
        nodes_[i].first = a;
        arcs_.push_back({i, nodes_[j].first, a, rev_cap});
        nodes_[j].first = a + 1;
    }

    double run() {
        init();
        int current = -1;
        for (;;) {
            int i = current;
            if (i < 0 || nodes_[i].parent == kNone) {
                i = next_active();
                if (i < 0)
                    break;
            }
            current = -1;

            int middle = -1;
            Node& n = nodes_[i];
            if (!n.is_sink) {
                for (int a = n.first; a >= 0; a = arcs_[a].next) {
                    if (arcs_[a].r_cap <= 0)
                        continue;
                    const int j = arcs_[a].head;
                    Node& m = nodes_[j];
                    if (m.parent == kNone) {
                        m.is_sink = false;
                        m.parent = arcs_[a].sister;
                        m.ts = n.ts;
                        m.dist = n.dist + 1;
                        set_active(j);
                    } else if (m.is_sink) {
                        middle = a;
                        break;
                    } else if (m.ts <= n.ts && m.dist > n.dist) {
                        m.parent = arcs_[a].sister;
                        m.ts = n.ts;
                        m.dist = n.dist + 1;
                    }
                }
            } else {
                for (int a = n.first; a >= 0; a = arcs_[a].next) {
                    if (arcs_[arcs_[a].sister].r_cap <= 0)
                        continue;
                    const int j = arcs_[a].head;
                    Node& m = nodes_[j];
                    if (m.parent == kNone) {
                        m.is_sink = true;
                        m.parent = arcs_[a].sister;
                        m.ts = n.ts;
                        m.dist = n.dist + 1;
                        set_active(j);
                    } else if (!m.is_sink) {
                        middle = arcs_[a].sister;
                        break;
                    } else if (m.ts <= n.ts && m.dist > n.dist) {
                        m.parent = arcs_[a].sister;
                        m.ts = n.ts;
                        m.dist = n.dist + 1;
                    }
                }
            }

            ++time_;
            if (middle >= 0) {
                current = i;
                augment(middle);
                while (!orphans_.empty()) {
                    const int o = orphans_.front();
                    orphans_.pop_front();
                    if (nodes_[o].is_sink)
                        adopt_sink(o);
                    else
                        adopt_source(o);
                }
            }
        }
        return flow_;
    }

    // Reachable from the source in the residual graph.
    bool source_side(int i) const { return nodes_[i].parent != kNone && !nodes_[i].is_sink; }

private:
    static constexpr int kNone = -1;
    static constexpr int kTerminal = -2;
    static constexpr int kOrphan = -3;
    static constexpr int kInfDist = std::numeric_limits<int>::max();

    struct Node {
        int first = -1;
        int parent = kNone;
        bool is_sink = false;
        bool active = false;
        double tr_cap = 0;
        long ts = 0;
        int dist = 0;
    };

    struct Arc {
        int head;
        int next;
        int sister;
        double r_cap;
    };

    void init() {
        time_ = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            n.active = false;
            n.ts = 0;
            if (n.tr_cap > 0) {
                n.is_sink = false;
                n.parent = kTerminal;
                n.dist = 1;
                set_active(static_cast<int>(i));
            } else if (n.tr_cap < 0) {
                n.is_sink = true;
                n.parent = kTerminal;
                n.dist = 1;
                set_active(static_cast<int>(i));
            } else {
                n.parent = kNone;
            }
        }
    }

    void set_active(int i) {
        if (!nodes_[i].active) {
            nodes_[i].active = true;
            active_.push_back(i);
        }
    }

    int next_active() {
        while (!active_.empty()) {
            const int i = active_.front();
            active_.pop_front();
            nodes_[i].active = false;
            if (nodes_[i].parent != kNone)
                return i;
        }
        return -1;
    }

    void make_orphan_front(int i) {
        nodes_[i].parent = kOrphan;
        orphans_.push_front(i);
    }

    void make_orphan_back(int i) {
        nodes_[i].parent = kOrphan;
        orphans_.push_back(i);
    }

    // `middle` runs from a source-tree node to a sink-tree node.
    void augment(int middle) {
        double bottleneck = arcs_[middle].r_cap;
        for (int i = arcs_[arcs_[middle].sister].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
                break;
            }
            bottleneck = std::min(bottleneck, arcs_[arcs_[a].sister].r_cap);
            i = arcs_[a].head;
        }
        for (int i = arcs_[middle].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);
                break;
            }
            bottleneck = std::min(bottleneck, arcs_[a].r_cap);
            i = arcs_[a].head;
        }

        arcs_[arcs_[middle].sister].r_cap += bottleneck;
        arcs_[middle].r_cap -= bottleneck;
        for (int i = arcs_[arcs_[middle].sister].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                nodes_[i].tr_cap -= bottleneck;
                if (nodes_[i].tr_cap == 0)
                    make_orphan_front(i);
                break;
            }
            arcs_[a].r_cap += bottleneck;
            arcs_[arcs_[a].sister].r_cap -= bottleneck;
            if (arcs_[arcs_[a].sister].r_cap == 0)
                make_orphan_front(i);
            i = arcs_[a].head;
        }
        for (int i = arcs_[middle].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                nodes_[i].tr_cap += bottleneck;
                if (nodes_[i].tr_cap == 0)
                    make_orphan_front(i);
                break;
            }
            arcs_[arcs_[a].sister].r_cap += bottleneck;
            arcs_[a].r_cap -= bottleneck;
            if (arcs_[a].r_cap == 0)
                make_orphan_front(i);
            i = arcs_[a].head;
        }
        flow_ += bottleneck;
    }

    // Distance to the terminal through valid parents, or kInfDist when the
    // chain ends in an orphan. Marks the walked chain with the current time.
    int origin_distance(int j) {
        int d = 0;
        int k = j;
        for (;;) {
            if (nodes_[k].ts == time_) {
                d += nodes_[k].dist;
                break;
            }
            const int a = nodes_[k].parent;
            ++d;
            if (a == kTerminal) {
                nodes_[k].ts = time_;
                nodes_[k].dist = 1;
                break;
            }
            if (a == kOrphan)
                return kInfDist;
            k = arcs_[a].head;
        }
        int dd = d;
        for (k = j; nodes_[k].ts != time_; k = arcs_[nodes_[k].parent].head) {
            nodes_[k].ts = time_;
            nodes_[k].dist = dd--;
        }
        return d;
    }

    void adopt_source(int i) {
        int best = -1;
        int best_dist = kInfDist;
        for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
            if (arcs_[arcs_[a].sister].r_cap <= 0)
                continue;
            const int j = arcs_[a].head;
            if (nodes_[j].is_sink || nodes_[j].parent == kNone)
                continue;
            const int d = origin_distance(j);
            if (d < best_dist) {
                best = a;
                best_dist = d;
            }
        }
        if (best >= 0) {
            nodes_[i].parent = best;
            nodes_[i].ts = time_;
            nodes_[i].dist = best_dist + 1;
            return;
        }
        nodes_[i].parent = kNone;
        for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
            const int j = arcs_[a].head;
            const int pa = nodes_[j].parent;
            if (nodes_[j].is_sink || pa == kNone)
                continue;
            if (arcs_[arcs_[a].sister].r_cap > 0)
                set_active(j);
            if (pa != kTerminal && pa != kOrphan && arcs_[pa].head == i)
                make_orphan_back(j);
        }
    }

    void adopt_sink(int i) {
        int best = -1;
        int best_dist = kInfDist;
        for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
            if (arcs_[a].r_cap <= 0)
                continue;
            const int j = arcs_[a].head;
            if (!nodes_[j].is_sink || nodes_[j].parent == kNone)
                continue;
            const int d = origin_distance(j);
            if (d < best_dist) {
                best = a;
                best_dist = d;
            }
        }
        if (best >= 0) {
            nodes_[i].parent = best;
            nodes_[i].ts = time_;
            nodes_[i].dist = best_dist + 1;
            return;
        }
        nodes_[i].parent = kNone;
        for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
            const int j = arcs_[a].head;
            const int pa = nodes_[j].parent;
            if (!nodes_[j].is_sink || pa == kNone)
                continue;
            if (arcs_[a].r_cap > 0)
                set_active(j);
            if (pa != kTerminal && pa != kOrphan && arcs_[pa].head == i)
                make_orphan_back(j);
        }
    }

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<int> active_;
    std::deque<int> orphans_;
    double flow_ = 0;
    long time_ = 0;
};

}  // namespace detail

// Exact minimum s-t cut. source_side[i] is true for inner nodes still reachable
// from the source in the final residual graph.
inline MinCut mincut(const CutGraph& g) {
    detail::TwoTreeMaxflow solver(g.inner_nodes);
    for (const auto& arc : g.arcs) {
        if (arc.capacity < 0)
            throw ArgumentError("mincut: negative capacity");
        const bool from_s = arc.from == g.source(), to_t = arc.to == g.sink();
        if (from_s && to_t)
            throw ArgumentError("mincut: direct source-sink arc");
        if (arc.from == g.sink() || arc.to == g.source())
            throw ArgumentError("mincut: arc into source or out of sink");
        if (from_s)
            solver.add_terminal(arc.to, arc.capacity, 0);
        else if (to_t)
            solver.add_terminal(arc.from, 0, arc.capacity);
        else
            solver.add_edge(arc.from, arc.to, arc.capacity, 0);
    }
    MinCut cut;
    cut.flow = solver.run();
    cut.source_side.resize(static_cast<std::size_t>(g.inner_nodes));
    for (int i = 0; i < g.inner_nodes; ++i)
        cut.source_side[i] = solver.source_side(i);
    return cut;
}

}  // namespace occseg
