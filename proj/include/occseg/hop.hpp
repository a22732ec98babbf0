#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "errors.hpp"

namespace occseg {

// Normalised clique statistic: the visible count m of a clique of M cells is
// rescaled to t = m * K / M and split linearly between bins floor(t) and
// ceil(t). The K + 1 entries always sum to one.
inline std::vector<double> clique_stats(int visible, int clique_cells, int K) {
    if (clique_cells < 1 || visible < 0 || visible > clique_cells || K < 1)
        throw ArgumentError("clique_stats: need 0 <= m <= M, M >= 1, K >= 1");
    std::vector<double> theta(static_cast<std::size_t>(K) + 1, 0.0);
    const double t = static_cast<double>(visible) * K / clique_cells;
    const int lo = static_cast<int>(std::floor(t));
    const double frac = t - lo;
    if (frac == 0.0) {
        theta[lo] = 1.0;
    } else {
        theta[lo] = 1.0 - frac;
        theta[lo + 1] = frac;
    }
    return theta;
}

// Potential of one clique as the inner product of w_HOP with its normalised
// statistic. For concave w_HOP this equals the lower envelope below.
inline double hop_potential(std::span<const double> w_hop, int visible, int clique_cells) {
    const int K = static_cast<int>(w_hop.size()) - 1;
    const double t = static_cast<double>(visible) * K / clique_cells;
    const int lo = static_cast<int>(std::floor(t));
    const double frac = t - lo;
    if (frac == 0.0)
        return w_hop[lo];
    return (1.0 - frac) * w_hop[lo] + frac * w_hop[lo + 1];
}

// Concavity test on second differences: w[k-1] - 2 w[k] + w[k+1] <= tol.
inline bool is_concave(std::span<const double> w_hop, double tol = 1e-12) {
    for (std::size_t k = 1; k + 1 < w_hop.size(); ++k) {
        const double scale = std::max({1.0, std::abs(w_hop[k - 1]), std::abs(w_hop[k]), std::abs(w_hop[k + 1])});
        if (w_hop[k - 1] - 2 * w_hop[k] + w_hop[k + 1] > tol * scale)
            return false;
    }
    return true;
}

// Lower envelope of K lines in the clique's visible count m in [0, M]:
//   psi(m) = min_k slope_k * m + intercept_k
// Line k interpolates (w_HOP)_{k-1} and (w_HOP)_k at standardised counts k-1
// and k, so its slope per cell carries the K / M rescaling.
struct HopEnvelope {
    int clique_cells = 0;  // M
    int K = 0;
    std::vector<double> slopes;
    std::vector<double> intercepts;
    bool concave = true;

    double operator()(double m) const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < slopes.size(); ++k)
            best = std::min(best, slopes[k] * m + intercepts[k]);
        return best;
    }
};

inline HopEnvelope hop_envelope(std::span<const double> w_hop, int clique_cells, int K) {
    if (K < 2 || static_cast<int>(w_hop.size()) != K + 1)
        throw ArgumentError("hop_envelope: need K >= 2 and K + 1 weights");
    if (clique_cells < 1)
        throw ArgumentError("hop_envelope: clique size must be >= 1");
    HopEnvelope env;
    env.clique_cells = clique_cells;
    env.K = K;
    env.concave = is_concave(w_hop);
    for (int k = 1; k <= K; ++k) {
        const double rise = w_hop[k] - w_hop[k - 1];
        env.slopes.push_back(rise * K / clique_cells);
        env.intercepts.push_back(w_hop[k] - rise * k);
    }
    return env;
}

}  // namespace occseg
