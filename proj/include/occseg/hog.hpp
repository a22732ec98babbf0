#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "image.hpp"

namespace occseg {

inline constexpr int kHogDims = 31;
inline constexpr double kHogEpsilon = 1e-8;

// Cell-major grid of 31-dimensional descriptors.
struct HogGrid {
    int width = 0;   // cells
    int height = 0;  // cells
    std::vector<double> values;

    std::span<const double> cell(int x, int y) const {
        return {values.data() + (static_cast<std::size_t>(y) * width + x) * kHogDims, kHogDims};
    }
    std::span<double> cell(int x, int y) {
        return {values.data() + (static_cast<std::size_t>(y) * width + x) * kHogDims, kHogDims};
    }
};

namespace detail {

// Gradient of the channel with the largest magnitude; central differences,
// borders replicated.
inline void max_channel_gradient(const RasterImage& img, int x, int y, double& gx, double& gy) {
    const int xl = std::max(x - 1, 0), xr = std::min(x + 1, img.width - 1);
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, img.height - 1);
    double best = -1.0;
    for (int c = 0; c < img.channels; ++c) {
        const double dx = img.at(xr, y, c) - img.at(xl, y, c);
        const double dy = img.at(x, yd, c) - img.at(x, yu, c);
        const double m = dx * dx + dy * dy;
        if (m > best) {
            best = m;
            gx = dx;
            gy = dy;
        }
    }
}

}  // namespace detail

// 31-dimensional HOG: 18 contrast-sensitive orientation bins, 9
// contrast-insensitive bins and 4 texture-energy features, one descriptor per
// cell_size x cell_size cell. Each pixel votes its gradient magnitude into the
// nearest of 18 directions of its own cell. Every cell is normalised by the
// four 2x2 blocks containing it (neighbours clamped at the grid border) and
// clipped at 0.2.
inline HogGrid extract_hog(const RasterImage& img, int cell_size) {
    if (cell_size < 2)
        throw ArgumentError("extract_hog: cell_size must be >= 2");
    HogGrid grid;
    grid.width = img.width / cell_size;
    grid.height = img.height / cell_size;
    if (grid.width < 1 || grid.height < 1)
        throw ArgumentError("extract_hog: image smaller than one cell");

    std::array<double, 9> ux{}, uy{};
    for (int o = 0; o < 9; ++o) {
        ux[o] = std::cos(o * std::numbers::pi / 9.0);
        uy[o] = std::sin(o * std::numbers::pi / 9.0);
    }

    const int ncells = grid.width * grid.height;
    std::vector<double> hist(static_cast<std::size_t>(ncells) * 18, 0.0);
    for (int y = 0; y < grid.height * cell_size; ++y) {
        for (int x = 0; x < grid.width * cell_size; ++x) {
            double gx = 0, gy = 0;
            detail::max_channel_gradient(img, x, y, gx, gy);
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0)
                continue;
            double best_dot = 0;
            int best_o = 0;
            for (int o = 0; o < 9; ++o) {
                const double dot = ux[o] * gx + uy[o] * gy;
                if (dot > best_dot) {
                    best_dot = dot;
                    best_o = o;
                } else if (-dot > best_dot) {
                    best_dot = -dot;
                    best_o = o + 9;
                }
            }
            const int cell = (y / cell_size) * grid.width + x / cell_size;
            hist[static_cast<std::size_t>(cell) * 18 + best_o] += mag;
        }
    }

    std::vector<double> energy(ncells, 0.0);
    for (int c = 0; c < ncells; ++c) {
        for (int o = 0; o < 9; ++o) {
            const double s = hist[c * 18 + o] + hist[c * 18 + o + 9];
            energy[c] += s * s;
        }
    }
    auto e = [&](int x, int y) {
        x = std::clamp(x, 0, grid.width - 1);
        y = std::clamp(y, 0, grid.height - 1);
        return energy[y * grid.width + x];
    };

    grid.values.assign(static_cast<std::size_t>(ncells) * kHogDims, 0.0);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const std::array<double, 4> norm = {
                1.0 / std::sqrt(e(x, y) + e(x + 1, y) + e(x, y + 1) + e(x + 1, y + 1) + kHogEpsilon),
                1.0 / std::sqrt(e(x, y) + e(x - 1, y) + e(x, y + 1) + e(x - 1, y + 1) + kHogEpsilon),
                1.0 / std::sqrt(e(x, y) + e(x + 1, y) + e(x, y - 1) + e(x + 1, y - 1) + kHogEpsilon),
                1.0 / std::sqrt(e(x, y) + e(x - 1, y) + e(x, y - 1) + e(x - 1, y - 1) + kHogEpsilon),
            };
            const double* h = &hist[static_cast<std::size_t>(y * grid.width + x) * 18];
            auto out = grid.cell(x, y);
            std::array<double, 4> texture{};
            for (int o = 0; o < 18; ++o) {
                double sum = 0;
                for (int k = 0; k < 4; ++k) {
                    const double t = std::min(h[o] * norm[k], 0.2);
                    sum += t;
                    texture[k] += t;
                }
                out[o] = 0.5 * sum;
            }
            for (int o = 0; o < 9; ++o) {
                double sum = 0;
                for (int k = 0; k < 4; ++k)
                    sum += std::min((h[o] + h[o + 9]) * norm[k], 0.2);
                out[18 + o] = 0.5 * sum;
            }
            for (int k = 0; k < 4; ++k)
                out[27 + k] = 0.2357 * texture[k];
        }
    }
    return grid;
}

}  // namespace occseg
