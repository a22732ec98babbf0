#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "pyramid.hpp"

namespace occseg {

// Per-pixel segment ids at base resolution. Ids are dense in
// [0, num_segments()) and numbered in order of first appearance (row-major).
struct SegmentMap {
    int width = 0;
    int height = 0;
    std::vector<int> pixel_labels;
    std::vector<long> segment_areas;

    int num_segments() const { return static_cast<int>(segment_areas.size()); }
    int at(int x, int y) const { return pixel_labels[static_cast<std::size_t>(y) * width + x]; }
};

// Segment id of every HOG cell of one pyramid level.
struct CellLabelGrid {
    int width = 0;
    int height = 0;
    std::vector<int> ids;

    int at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
};

using SegmentCells = std::vector<CellLabelGrid>;

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(int n) : parent_(n), rank_(n, 0), size_(n, 1) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x) {
        int root = x;
        while (parent_[root] != root)
            root = parent_[root];
        while (parent_[x] != root) {
            const int next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    // Returns the surviving root.
    int join(int a, int b) {
        if (rank_[a] < rank_[b])
            std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        if (rank_[a] == rank_[b])
            ++rank_[a];
        return a;
    }

    int size(int root) const { return size_[root]; }

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
    std::vector<int> size_;
};

struct GraphEdge {
    double weight;
    int a;
    int b;
};

}  // namespace detail

// Greedy graph-based segmentation on the 8-connected pixel grid. Edge weight is
// the Euclidean colour distance; two regions merge when the connecting edge is
// no heavier than either region's internal difference plus k / |region|.
// Regions smaller than min_size are then absorbed across the lightest edges.
inline SegmentMap segment_unsupervised(const RasterImage& img, double k, int min_size) {
    if (!(k > 0))
        throw ArgumentError("segment_unsupervised: k must be positive");
    if (min_size < 1)
        throw ArgumentError("segment_unsupervised: min_size must be >= 1");
    if (img.width < 1 || img.height < 1)
        throw ArgumentError("segment_unsupervised: empty image");

    const int w = img.width, h = img.height;
    auto dist = [&](int x0, int y0, int x1, int y1) {
        double s = 0;
        for (int c = 0; c < img.channels; ++c) {
            const double d = img.at(x0, y0, c) - img.at(x1, y1, c);
            s += d * d;
        }
        return std::sqrt(s);
    };

    std::vector<detail::GraphEdge> edges;
    edges.reserve(static_cast<std::size_t>(w) * h * 4);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int id = y * w + x;
            if (x + 1 < w)
                edges.push_back({dist(x, y, x + 1, y), id, id + 1});
            if (y + 1 < h)
                edges.push_back({dist(x, y, x, y + 1), id, id + w});
            if (x + 1 < w && y + 1 < h)
                edges.push_back({dist(x, y, x + 1, y + 1), id, id + w + 1});
            if (x + 1 < w && y > 0)
                edges.push_back({dist(x, y, x + 1, y - 1), id, id - w + 1});
        }
    }
    std::stable_sort(edges.begin(), edges.end(),
                     [](const auto& l, const auto& r) { return l.weight < r.weight; });

    detail::DisjointSets sets(w * h);
    std::vector<double> threshold(static_cast<std::size_t>(w) * h, k);
    for (const auto& e : edges) {
        int a = sets.find(e.a);
        int b = sets.find(e.b);
        if (a == b || e.weight > threshold[a] || e.weight > threshold[b])
            continue;
        const int root = sets.join(a, b);
        threshold[root] = e.weight + k / sets.size(root);
    }
    for (const auto& e : edges) {
        const int a = sets.find(e.a);
        const int b = sets.find(e.b);
        if (a != b && (sets.size(a) < min_size || sets.size(b) < min_size))
            sets.join(a, b);
    }

    SegmentMap seg;
    seg.width = w;
    seg.height = h;
    seg.pixel_labels.resize(static_cast<std::size_t>(w) * h);
    std::vector<int> dense(static_cast<std::size_t>(w) * h, -1);
    for (int i = 0; i < w * h; ++i) {
        const int root = sets.find(i);
        if (dense[root] < 0) {
            dense[root] = seg.num_segments();
            seg.segment_areas.push_back(0);
        }
        seg.pixel_labels[i] = dense[root];
        ++seg.segment_areas[dense[root]];
    }
    return seg;
}

// Majority segment id over each cell's base-pixel footprint, ties going to the
// smaller id. Footprints are clipped to the image.
inline SegmentCells project_segments(const SegmentMap& seg, const PyramidGeometry& geo,
                                     const std::vector<std::pair<int, int>>& grid_dims) {
    if (seg.width != geo.base_width || seg.height != geo.base_height)
        throw ArgumentError("project_segments: segment map and pyramid disagree on image size");
    if (static_cast<int>(grid_dims.size()) != geo.num_levels())
        throw ArgumentError("project_segments: level count mismatch");

    SegmentCells out(grid_dims.size());
    std::vector<int> ids;
    for (int level = 0; level < geo.num_levels(); ++level) {
        auto& grid = out[level];
        grid.width = grid_dims[level].first;
        grid.height = grid_dims[level].second;
        grid.ids.assign(static_cast<std::size_t>(grid.width) * grid.height, 0);
        for (int cy = 0; cy < grid.height; ++cy) {
            PixelSpan ys = geo.cell_span(cy, 1, level);
            ys.begin = std::clamp<long>(ys.begin, 0, seg.height - 1);
            ys.end = std::clamp<long>(ys.end, ys.begin + 1, seg.height);
            for (int cx = 0; cx < grid.width; ++cx) {
                PixelSpan xs = geo.cell_span(cx, 1, level);
                xs.begin = std::clamp<long>(xs.begin, 0, seg.width - 1);
                xs.end = std::clamp<long>(xs.end, xs.begin + 1, seg.width);
                ids.clear();
                for (long y = ys.begin; y < ys.end; ++y)
                    for (long x = xs.begin; x < xs.end; ++x)
                        ids.push_back(seg.at(static_cast<int>(x), static_cast<int>(y)));
                std::sort(ids.begin(), ids.end());
                int best = ids.front();
                std::size_t best_count = 0;
                for (std::size_t i = 0; i < ids.size();) {
                    std::size_t j = i;
                    while (j < ids.size() && ids[j] == ids[i])
                        ++j;
                    if (j - i > best_count) {
                        best_count = j - i;
                        best = ids[i];
                    }
                    i = j;
                }
                grid.ids[static_cast<std::size_t>(cy) * grid.width + cx] = best;
            }
        }
    }
    return out;
}

inline SegmentCells project_segments(const SegmentMap& seg, const FeaturePyramid& pyr) {
    std::vector<std::pair<int, int>> dims;
    for (const auto& level : pyr.levels)
        dims.emplace_back(level.grid_w(), level.grid_h());
    return project_segments(seg, pyr.geometry, dims);
}

// Debug dump: one 16-bit sample per pixel holding the segment id.
inline void save_segment_pgm(const SegmentMap& seg, const std::filesystem::path& path) {
    if (seg.num_segments() > 65536)
        throw ArgumentError("save_segment_pgm: more than 65536 segments");
    std::vector<std::uint16_t> values(seg.pixel_labels.begin(), seg.pixel_labels.end());
    save_pgm16(values, seg.width, seg.height, path);
}

}  // namespace occseg
