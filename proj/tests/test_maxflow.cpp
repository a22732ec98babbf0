#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "occseg/maxflow.hpp"

using namespace occseg;

namespace {

// Minimum cut by enumerating every source-side subset of the inner nodes.
double brute_force_cut(const CutGraph& g, std::vector<bool>* best_side = nullptr) {
    const int n = g.inner_nodes;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        auto on_source = [&](int v) {
            if (v == g.source())
                return true;
            if (v == g.sink())
                return false;
            return ((mask >> v) & 1u) != 0;
        };
        double cut = 0;
        for (const auto& a : g.arcs)
            if (on_source(a.from) && !on_source(a.to))
                cut += a.capacity;
        if (cut < best) {
            best = cut;
            if (best_side) {
                best_side->assign(static_cast<std::size_t>(n), false);
                for (int v = 0; v < n; ++v)
                    (*best_side)[v] = on_source(v);
            }
        }
    }
    return best;
}

double cut_of(const CutGraph& g, const std::vector<bool>& side) {
    auto on_source = [&](int v) { return v == g.source() || (v != g.sink() && side[v]); };
    double cut = 0;
    for (const auto& a : g.arcs)
        if (on_source(a.from) && !on_source(a.to))
            cut += a.capacity;
    return cut;
}

}  // namespace

TEST(Maxflow, SingleChain) {
    CutGraph g;
    const int a = g.add_node(), b = g.add_node();
    g.add_arc(g.source(), a, 3);
    g.add_arc(a, b, 2);
    g.add_arc(b, g.sink(), 5);
    const MinCut cut = mincut(g);
    EXPECT_DOUBLE_EQ(cut.flow, 2);
    EXPECT_TRUE(cut.source_side[a]);
    EXPECT_FALSE(cut.source_side[b]);
}

TEST(Maxflow, MatchesEnumerationOnRandomGraphs) {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> cap(0.0, 5.0);
    for (int trial = 0; trial < 300; ++trial) {
        CutGraph g;
        const int n = 1 + static_cast<int>(rng() % 10);
        for (int i = 0; i < n; ++i)
            g.add_node();
        for (int i = 0; i < n; ++i) {
            if (rng() % 2)
                g.add_arc(g.source(), i, cap(rng));
            if (rng() % 2)
                g.add_arc(i, g.sink(), cap(rng));
            for (int j = 0; j < n; ++j)
                if (i != j && rng() % 3 == 0)
                    g.add_arc(i, j, cap(rng));
        }
        const MinCut cut = mincut(g);
        const double expect = brute_force_cut(g);
        ASSERT_NEAR(cut.flow, expect, 1e-9) << "trial " << trial;
        EXPECT_NEAR(cut_of(g, cut.source_side), expect, 1e-9) << "trial " << trial;
    }
}

TEST(Maxflow, RejectsInvalidArcs) {
    CutGraph g;
    g.add_node();
    EXPECT_THROW(g.add_arc(0, g.sink(), -1), ArgumentError);
    CutGraph h;
    h.add_node();
    h.arcs.push_back({h.source(), h.sink(), 1.0});
    EXPECT_THROW(mincut(h), ArgumentError);
}
