#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "errors.hpp"
#include "hop.hpp"
#include "model.hpp"
#include "pyramid.hpp"
#include "segmentation.hpp"

namespace occseg {

// One segment restricted to the in-image cells of a box.
struct Clique {
    int segment = 0;
    std::vector<int> members;  // row-major box cell indices, ascending
};

// Everything a box placement reads from the pyramid: per-cell HOG (null when
// the cell lies outside the image), the cliques formed by in-image cells, and
// the number of out-of-image cells.
struct BoxCells {
    int w = 0;
    int h = 0;
    std::vector<const double*> hog;
    std::vector<Clique> cliques;  // ordered by segment id
    int truncated = 0;

    int cells() const { return w * h; }
};

inline BoxCells gather_box(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                           const BoxPosition& p, const ViewpointShape& shape) {
    if (p.level < 0 || p.level >= pyr.num_levels())
        throw ArgumentError("box level outside pyramid");
    if (seg_cells.size() != pyr.levels.size())
        throw ArgumentError("segment cells and pyramid disagree on level count");
    const auto& level = pyr.levels[static_cast<std::size_t>(p.level)];
    const auto& ids = seg_cells[static_cast<std::size_t>(p.level)];
    if (ids.width != level.grid_w() || ids.height != level.grid_h())
        throw ArgumentError("segment cells and pyramid disagree on grid size");

    BoxCells box;
    box.w = shape.w;
    box.h = shape.h;
    box.hog.assign(static_cast<std::size_t>(shape.cells()), nullptr);
    std::map<int, std::vector<int>> by_segment;
    for (int cy = 0; cy < shape.h; ++cy) {
        for (int cx = 0; cx < shape.w; ++cx) {
            const int gx = p.x + cx, gy = p.y + cy;
            const int i = cy * shape.w + cx;
            if (gx < 0 || gy < 0 || gx >= level.grid_w() || gy >= level.grid_h()) {
                ++box.truncated;
                continue;
            }
            box.hog[i] = level.hog.cell(gx, gy).data();
            by_segment[ids.at(gx, gy)].push_back(i);
        }
    }
    for (auto& [segment, members] : by_segment)
        box.cliques.push_back({segment, std::move(members)});
    return box;
}

// Number of 4-connected in-box neighbour pairs with different labels.
inline int pairwise_disagreements(const BitVector& v, int w, int h) {
    int count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int i = y * w + x;
            if (x + 1 < w && v[i] != v[i + 1])
                ++count;
            if (y + 1 < h && v[i] != v[i + w])
                ++count;
        }
    }
    return count;
}

// Joint feature vector. Only the block of `viewpoint` is stored; all other
// viewpoint blocks are zero.
struct JointFeature {
    int viewpoint = 0;
    std::size_t offset = 0;       // start of the block in the full vector
    std::size_t total_length = 0;
    std::vector<double> block;

    double dot(std::span<const double> w) const {
        if (w.size() != total_length)
            throw ArgumentError("JointFeature::dot: length mismatch");
        double s = 0;
        for (std::size_t i = 0; i < block.size(); ++i)
            s += w[offset + i] * block[i];
        return s;
    }

    double dot(const WeightVector& w) const { return dot(w.values()); }

    std::vector<double> dense() const {
        std::vector<double> out(total_length, 0.0);
        std::copy(block.begin(), block.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
        return out;
    }
};

inline void check_label(const Label& y, const ModelLayout& layout) {
    if (y.viewpoint < 0 || y.viewpoint >= layout.num_viewpoints())
        throw ArgumentError("label viewpoint out of range");
    if (static_cast<int>(y.v.size()) != layout.shape(y.viewpoint).cells())
        throw ArgumentError("visibility vector length does not match viewpoint shape");
}

// Block layout mirrors the weights: visible HOG group, occluded HOG group,
// complemented labels, truncation count, pairwise disagreement count, summed
// clique statistics and the constant 1.
inline JointFeature assemble_features(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                                      const Label& y, const ModelLayout& layout) {
    check_label(y, layout);
    const int a = y.viewpoint;
    const auto& shape = layout.shape(a);
    const BoxCells box = gather_box(pyr, seg_cells, y.p, shape);
    const int K = layout.clique_size;

    JointFeature f;
    f.viewpoint = a;
    f.offset = layout.block_offset(a);
    f.total_length = layout.total_length();
    f.block.assign(layout.block_length(a), 0.0);

    for (int i = 0; i < box.cells(); ++i) {
        if (box.hog[i]) {
            const std::size_t dst = (y.v[i] ? layout.visible_offset(a) : layout.occluded_offset(a)) +
                                    static_cast<std::size_t>(i) * kHogDims;
            std::copy_n(box.hog[i], kHogDims, f.block.begin() + static_cast<std::ptrdiff_t>(dst));
        }
        f.block[layout.prior_offset(a) + i] = y.v[i] ? 0.0 : 1.0;
    }
    f.block[layout.trunc_offset(a)] = box.truncated;
    f.block[layout.pairwise_offset(a)] = pairwise_disagreements(y.v, shape.w, shape.h);
    for (const auto& c : box.cliques) {
        int m = 0;
        for (int i : c.members)
            m += y.v[i];
        const auto theta = clique_stats(m, static_cast<int>(c.members.size()), K);
        for (int k = 0; k <= K; ++k)
            f.block[layout.hop_offset(a) + k] += theta[k];
    }
    f.block[layout.bias_offset(a)] = 1.0;
    return f;
}

}  // namespace occseg
