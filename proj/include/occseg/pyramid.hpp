#pragma once

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "hog.hpp"
#include "image.hpp"
#include "parallel.hpp"

namespace occseg {

inline constexpr int kDefaultCellSize = 8;
inline constexpr int kDefaultLevels = 11;
inline const double kDefaultScaleStep = std::pow(2.0, -0.25);

// Half-open pixel interval [begin, end) on one axis of the base image.
struct PixelSpan {
    long begin = 0;
    long end = 0;
    long size() const { return end > begin ? end - begin : 0; }
};

// Scale-space layout shared by features, losses and masks. Level 0 is the
// finest level (scale 1); cell c of a level with scale s owns the base pixels
// whose centres fall in [c * cell_size / s, (c + 1) * cell_size / s).
struct PyramidGeometry {
    int cell_size = kDefaultCellSize;
    int base_width = 0;
    int base_height = 0;
    std::vector<double> scales;

    int num_levels() const { return static_cast<int>(scales.size()); }

    double scale(int level) const {
        if (level < 0 || level >= num_levels())
            throw ArgumentError("pyramid level out of range");
        return scales[static_cast<std::size_t>(level)];
    }

    // First base pixel whose centre lies at or beyond the left edge of cell c.
    long pixel_edge(long c, int level) const {
        return static_cast<long>(std::ceil(c * cell_size / scale(level) - 0.5));
    }

    PixelSpan cell_span(long first_cell, long num_cells, int level) const {
        return {pixel_edge(first_cell, level), pixel_edge(first_cell + num_cells, level)};
    }
};

struct PyramidLevel {
    double scale = 1.0;
    HogGrid hog;

    int grid_w() const { return hog.width; }
    int grid_h() const { return hog.height; }
};

struct FeaturePyramid {
    PyramidGeometry geometry;
    std::vector<PyramidLevel> levels;

    int num_levels() const { return static_cast<int>(levels.size()); }
    int cell_size() const { return geometry.cell_size; }
};

inline int scaled_extent(int extent, double scale) {
    return static_cast<int>(std::lround(extent * scale));
}

// Level k is the image bilinearly resampled by scale_step^k. Construction stops
// at the first level whose grid would be smaller than one cell, so the result
// may hold fewer than n_levels levels.
inline FeaturePyramid build_pyramid(const RasterImage& img, double scale_step, int n_levels,
                                    int cell_size = kDefaultCellSize) {
    if (!(scale_step > 0.0 && scale_step < 1.0))
        throw ArgumentError("build_pyramid: scale_step must lie in (0, 1)");
    if (n_levels < 1)
        throw ArgumentError("build_pyramid: n_levels must be >= 1");
    if (img.width < cell_size || img.height < cell_size)
        throw ArgumentError("build_pyramid: image smaller than one cell");

    FeaturePyramid pyr;
    pyr.geometry.cell_size = cell_size;
    pyr.geometry.base_width = img.width;
    pyr.geometry.base_height = img.height;
    for (int k = 0; k < n_levels; ++k) {
        const double s = std::pow(scale_step, k);
        const int w = scaled_extent(img.width, s);
        const int h = scaled_extent(img.height, s);
        if (w / cell_size < 1 || h / cell_size < 1)
            break;
        pyr.geometry.scales.push_back(s);
        pyr.levels.push_back({s, {}});
    }

    parallel_for(pyr.levels.size(), [&](std::size_t k) {
        if (k == 0) {
            pyr.levels[k].hog = extract_hog(img, cell_size);
        } else {
            const double s = pyr.levels[k].scale;
            pyr.levels[k].hog = extract_hog(
                resize_bilinear(img, scaled_extent(img.width, s), scaled_extent(img.height, s)),
                cell_size);
        }
    });
    return pyr;
}

}  // namespace occseg
