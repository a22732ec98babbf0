#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "hop.hpp"
#include "maxflow.hpp"
#include "model.hpp"

namespace occseg {

// Unary responses and coupling weights of one box placement:
//   E(v) = sum_i F_i v_i + (B_i + R_i)(1 - v_i) + W * #disagreeing 4-neighbours
//          + sum_c psi_c(v_c) + constant
struct EnergyMaps {
    int w = 0;
    int h = 0;
    std::vector<double> visible;   // F_i, visible-filter response
    std::vector<double> occluded;  // B_i, occlusion-filter response
    std::vector<double> prior;     // R_i, cost of label 0
    double constant = 0;           // w_trunc * c(p) + w_bias
    double pairwise = 0;           // W
    std::vector<double> hop;       // w_HOP, K + 1 entries
    std::vector<Clique> cliques;

    int cells() const { return w * h; }
};

inline double dot31(const double* a, const double* b) {
    double s = 0;
    for (int k = 0; k < kHogDims; ++k)
        s += a[k] * b[k];
    return s;
}

inline EnergyMaps build_energy_maps(const BoxCells& box, const ViewpointWeights& vw) {
    EnergyMaps maps;
    maps.w = box.w;
    maps.h = box.h;
    const int n = box.cells();
    maps.visible.assign(n, 0.0);
    maps.occluded.assign(n, 0.0);
    maps.prior.assign(vw.prior.begin(), vw.prior.end());
    for (int i = 0; i < n; ++i) {
        if (!box.hog[i])
            continue;
        maps.visible[i] = dot31(vw.visible.data() + static_cast<std::size_t>(i) * kHogDims, box.hog[i]);
        maps.occluded[i] = dot31(vw.occluded.data() + static_cast<std::size_t>(i) * kHogDims, box.hog[i]);
    }
    maps.constant = vw.trunc * box.truncated + vw.bias;
    maps.pairwise = vw.pairwise;
    maps.hop.assign(vw.hop.begin(), vw.hop.end());
    maps.cliques = box.cliques;
    return maps;
}

// Term-by-term labelling energy. Clique potentials use the normalised
// statistic, which coincides with the lower envelope whenever w_HOP is concave.
inline double energy(const EnergyMaps& maps, const BitVector& v) {
    if (static_cast<int>(v.size()) != maps.cells())
        throw ArgumentError("energy: labelling length does not match box");
    double e = maps.constant;
    for (int i = 0; i < maps.cells(); ++i)
        e += v[i] ? maps.visible[i] : maps.occluded[i] + maps.prior[i];
    e += maps.pairwise * pairwise_disagreements(v, maps.w, maps.h);
    for (const auto& c : maps.cliques) {
        int m = 0;
        for (int i : c.members)
            m += v[i];
        e += hop_potential(maps.hop, m, static_cast<int>(c.members.size()));
    }
    return e;
}

// Network whose minimum cut plus `offset` is the minimum energy. Nodes
// 0..cells-1 are the box cells; each clique appends K-1 auxiliary nodes.
struct EnergyGraph {
    CutGraph graph;
    double offset = 0;
    int cells = 0;
};

inline constexpr double kSubmodularTolerance = 1e-12;

inline void check_representable(const EnergyMaps& maps) {
    if (maps.pairwise < -kSubmodularTolerance)
        throw RepresentabilityError("pairwise weight W = " + std::to_string(maps.pairwise) +
                                    " is negative; energy is not submodular");
    if (!is_concave(maps.hop, kSubmodularTolerance))
        throw RepresentabilityError("w_HOP is not concave (positive second difference)");
}

inline EnergyGraph build_graph(const EnergyMaps& maps) {
    check_representable(maps);
    const int n = maps.cells();
    const int K = static_cast<int>(maps.hop.size()) - 1;

    EnergyGraph eg;
    eg.cells = n;
    eg.graph.inner_nodes = n;
    eg.offset = maps.constant;

    // (cost if labelled 1, cost if labelled 0) per node
    std::vector<double> cost1(n), cost0(n);
    for (int i = 0; i < n; ++i) {
        cost1[i] = maps.visible[i];
        cost0[i] = maps.occluded[i] + maps.prior[i];
    }

    std::vector<CutGraph::Arc> inner;
    const double W = std::max(maps.pairwise, 0.0);
    if (W > 0) {
        for (int y = 0; y < maps.h; ++y) {
            for (int x = 0; x < maps.w; ++x) {
                const int i = y * maps.w + x;
                if (x + 1 < maps.w) {
                    inner.push_back({i, i + 1, W});
                    inner.push_back({i + 1, i, W});
                }
                if (y + 1 < maps.h) {
                    inner.push_back({i, i + maps.w, W});
                    inner.push_back({i + maps.w, i, W});
                }
            }
        }
    }

    // psi(m) = line_1(m) + sum_k min(0, line_{k+1}(m) - line_k(m)); each min
    // is realised by an auxiliary node z_k that pays its term when labelled 1.
    for (const auto& c : maps.cliques) {
        const int M = static_cast<int>(c.members.size());
        const HopEnvelope env = hop_envelope(maps.hop, M, K);
        for (int i : c.members)
            cost1[i] += env.slopes[0];
        eg.offset += env.intercepts[0];
        for (int k = 0; k + 1 < K; ++k) {
            const double d = std::min(env.slopes[k + 1] - env.slopes[k], 0.0);
            const int z = eg.graph.add_node();
            cost1.push_back(env.intercepts[k + 1] - env.intercepts[k] + M * d);
            cost0.push_back(0.0);
            if (d < 0)
                for (int i : c.members)
                    inner.push_back({z, i, -d});
        }
    }

    const int s = eg.graph.source(), t = eg.graph.sink();
    for (int i = 0; i < eg.graph.inner_nodes; ++i) {
        const double base = std::min(cost0[i], cost1[i]);
        eg.offset += base;
        eg.graph.add_arc(s, i, cost0[i] - base);
        eg.graph.add_arc(i, t, cost1[i] - base);
    }
    for (const auto& arc : inner)
        eg.graph.add_arc(arc.from, arc.to, arc.capacity);
    return eg;
}

struct Labelling {
    BitVector v;
    double energy = 0;
    double cut_value = 0;  // flow + offset; equals energy up to rounding
};

inline Labelling min_energy_labelling(const EnergyMaps& maps) {
    const EnergyGraph eg = build_graph(maps);
    const MinCut cut = mincut(eg.graph);
    Labelling out;
    out.v.resize(static_cast<std::size_t>(maps.cells()));
    for (int i = 0; i < maps.cells(); ++i)
        out.v[i] = cut.source_side[i] ? 1 : 0;
    out.cut_value = cut.flow + eg.offset;
    out.energy = energy(maps, out.v);
    return out;
}

inline Labelling min_energy_labelling(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                                      const WeightVector& w, const BoxPosition& p, int viewpoint) {
    const BoxCells box = gather_box(pyr, seg_cells, p, w.layout().shape(viewpoint));
    return min_energy_labelling(build_energy_maps(box, w.viewpoint(viewpoint)));
}

}  // namespace occseg
