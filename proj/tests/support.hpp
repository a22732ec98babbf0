#pragma once

// Shared fixtures and brute-force oracles. Every oracle here recomputes its
// answer from first principles (enumeration, direct sums) without calling the
// library routine it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "occseg/occseg.hpp"

namespace occseg::testing {

inline double normal(std::mt19937_64& rng, double sd = 1.0) {
    return std::normal_distribution<double>(0.0, sd)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int integer(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Concave sequence of K + 1 values: random start, decreasing increments.
inline std::vector<double> random_concave(std::mt19937_64& rng, int K, double scale = 1.0) {
    std::vector<double> inc(static_cast<std::size_t>(K));
    for (auto& d : inc)
        d = normal(rng, scale);
    std::sort(inc.begin(), inc.end(), std::greater<>());
    std::vector<double> w{normal(rng, scale)};
    for (double d : inc)
        w.push_back(w.back() + d);
    return w;
}

inline BitVector random_bits(std::mt19937_64& rng, int n) {
    BitVector v(static_cast<std::size_t>(n));
    for (auto& b : v)
        b = static_cast<std::uint8_t>(integer(rng, 0, 1));
    return v;
}

inline BitVector bits_of(unsigned mask, int n) {
    BitVector v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[i] = (mask >> i) & 1u;
    return v;
}

// Pyramid with random HOG cells and random segment ids, built directly from
// grid sizes. Level l has scale step^l.
struct RandomScene {
    FeaturePyramid pyr;
    SegmentCells seg;
};

inline RandomScene random_scene(std::mt19937_64& rng, int base_w_cells, int base_h_cells, int levels,
                                int n_segments, double step = 0.5, int cell_size = 8) {
    RandomScene s;
    s.pyr.geometry.cell_size = cell_size;
    s.pyr.geometry.base_width = base_w_cells * cell_size;
    s.pyr.geometry.base_height = base_h_cells * cell_size;
    for (int l = 0; l < levels; ++l) {
        const double sc = std::pow(step, l);
        const int gw = std::max(1, static_cast<int>(std::lround(base_w_cells * cell_size * sc)) / cell_size);
        const int gh = std::max(1, static_cast<int>(std::lround(base_h_cells * cell_size * sc)) / cell_size);
        s.pyr.geometry.scales.push_back(sc);
        PyramidLevel level;
        level.scale = sc;
        level.hog.width = gw;
        level.hog.height = gh;
        level.hog.values.resize(static_cast<std::size_t>(gw) * gh * kHogDims);
        for (auto& x : level.hog.values)
            x = uniform(rng, 0.0, 0.4);
        s.pyr.levels.push_back(std::move(level));
        CellLabelGrid g;
        g.width = gw;
        g.height = gh;
        g.ids.resize(static_cast<std::size_t>(gw) * gh);
        for (auto& id : g.ids)
            id = integer(rng, 0, n_segments - 1);
        s.seg.push_back(std::move(g));
    }
    return s;
}

// Random weights with W >= 0 and concave w_HOP in every viewpoint block.
inline WeightVector random_weights(std::mt19937_64& rng, const ModelLayout& layout, double scale = 1.0) {
    WeightVector w(layout);
    for (auto& x : w.values())
        x = normal(rng, scale);
    for (int a = 0; a < layout.num_viewpoints(); ++a) {
        auto block = w.block(a);
        block[layout.pairwise_offset(a)] = std::abs(block[layout.pairwise_offset(a)]);
        const auto hop = random_concave(rng, layout.clique_size, scale);
        std::copy(hop.begin(), hop.end(), block.begin() + static_cast<std::ptrdiff_t>(layout.hop_offset(a)));
    }
    return w;
}

// Term-by-term energy of a labelling straight from the pyramid, weights and
// the clique definition (in-image cells grouped by segment id).
inline double direct_energy(const RandomScene& s, const WeightVector& w, const Label& y) {
    const auto& layout = w.layout();
    const auto& shape = layout.shape(y.viewpoint);
    const auto block = w.block(y.viewpoint);
    const auto& level = s.pyr.levels[y.p.level];
    const auto& ids = s.seg[y.p.level];
    const int K = layout.clique_size;
    double e = block[layout.bias_offset(y.viewpoint)];
    std::map<int, std::pair<int, int>> cliques;  // segment -> (members, visible)
    for (int cy = 0; cy < shape.h; ++cy) {
        for (int cx = 0; cx < shape.w; ++cx) {
            const int i = cy * shape.w + cx;
            const int gx = y.p.x + cx, gy = y.p.y + cy;
            const bool inside = gx >= 0 && gy >= 0 && gx < level.grid_w() && gy < level.grid_h();
            if (!inside) {
                e += block[layout.trunc_offset(y.viewpoint)];
            } else {
                const auto h = level.hog.cell(gx, gy);
                const std::size_t off = y.v[i] ? layout.visible_offset(y.viewpoint) : layout.occluded_offset(y.viewpoint);
                for (int k = 0; k < kHogDims; ++k)
                    e += block[off + static_cast<std::size_t>(i) * kHogDims + k] * h[k];
                auto& c = cliques[ids.at(gx, gy)];
                c.first += 1;
                c.second += y.v[i];
            }
            if (!y.v[i])
                e += block[layout.prior_offset(y.viewpoint) + i];
            if (cx + 1 < shape.w && y.v[i] != y.v[i + 1])
                e += block[layout.pairwise_offset(y.viewpoint)];
            if (cy + 1 < shape.h && y.v[i] != y.v[i + shape.w])
                e += block[layout.pairwise_offset(y.viewpoint)];
        }
    }
    for (const auto& [id, c] : cliques) {
        // Linear interpolation of w_HOP at the standardised count m K / M.
        const double t = static_cast<double>(c.second) * K / c.first;
        const int lo = std::min(static_cast<int>(t), K - 1);
        const double f = t - lo;
        e += (1 - f) * block[layout.hop_offset(y.viewpoint) + lo] + f * block[layout.hop_offset(y.viewpoint) + lo + 1];
    }
    return e;
}

// Exhaustive minimum of an energy over all 2^n labellings.
inline std::pair<double, BitVector> brute_force_min(const EnergyMaps& maps) {
    const int n = maps.cells();
    double best = std::numeric_limits<double>::infinity();
    BitVector arg;
    for (unsigned m = 0; m < (1u << n); ++m) {
        const BitVector v = bits_of(m, n);
        const double e = energy(maps, v);
        if (e < best) {
            best = e;
            arg = v;
        }
    }
    return {best, arg};
}

// Fraction of base pixels in the union of two boxes where the projected
// labellings differ, by explicit rasterisation of both boxes.
inline double raster_hamming(const Label& a, const ViewpointShape& sa, const Label& b, const ViewpointShape& sb,
                             const PyramidGeometry& geo) {
    auto paint = [&](const Label& y, const ViewpointShape& s, long x0, long y0, long w, long h) {
        std::vector<int> inside(static_cast<std::size_t>(w * h), 0), label(static_cast<std::size_t>(w * h), 0);
        for (int cy = 0; cy < s.h; ++cy)
            for (int cx = 0; cx < s.w; ++cx) {
                const PixelRect r = cell_pixels(geo, y.p, cx, cy);
                for (long py = r.y.begin; py < r.y.end; ++py)
                    for (long px = r.x.begin; px < r.x.end; ++px) {
                        const std::size_t k = static_cast<std::size_t>((py - y0) * w + (px - x0));
                        inside[k] = 1;
                        label[k] = y.v[static_cast<std::size_t>(cy * s.w + cx)];
                    }
            }
        return std::make_pair(inside, label);
    };
    const PixelRect ra = box_pixels(geo, a.p, sa), rb = box_pixels(geo, b.p, sb);
    const long x0 = std::min(ra.x.begin, rb.x.begin), y0 = std::min(ra.y.begin, rb.y.begin);
    const long w = std::max(ra.x.end, rb.x.end) - x0, h = std::max(ra.y.end, rb.y.end) - y0;
    const auto [ia, la] = paint(a, sa, x0, y0, w, h);
    const auto [ib, lb] = paint(b, sb, x0, y0, w, h);
    long uni = 0, diff = 0;
    for (std::size_t k = 0; k < ia.size(); ++k) {
        if (!ia[k] && !ib[k])
            continue;
        ++uni;
        diff += la[k] != lb[k];
    }
    return uni ? static_cast<double>(diff) / uni : 0.0;
}

// Minimiser of 1/2 ||w||^2 + C sum_i xi_i subject to the margin rows,
// xi >= 0 and the cone rows, found by enumerating every active set of the
// inequality system and solving its KKT equations densely.
struct ActiveSetResult {
    Eigen::VectorXd w;
    double objective = std::numeric_limits<double>::infinity();
};

inline ActiveSetResult active_set_oracle(const QpProblem& qp) {
    const int n = static_cast<int>(qp.dim);
    const int s = qp.num_samples;
    const int nv = n + s;
    // Inequalities A x >= b over x = (w, xi).
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    for (const auto& r : qp.rows) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        for (int k = 0; k < n; ++k)
            a[k] = r.g[k];
        a[n + r.sample] = 1;
        rows.push_back(a);
        rhs.push_back(r.loss);
    }
    for (int i = 0; i < s; ++i) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        a[n + i] = 1;
        rows.push_back(a);
        rhs.push_back(0);
    }
    for (const auto& b : qp.cone.concave)
        for (std::size_t k = 0; k + 2 < b.length; ++k) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
            a[static_cast<int>(b.offset + k)] = -1;
            a[static_cast<int>(b.offset + k + 1)] = 2;
            a[static_cast<int>(b.offset + k + 2)] = -1;
            rows.push_back(a);
            rhs.push_back(0);
        }
    for (std::size_t k : qp.cone.nonnegative) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        a[static_cast<int>(k)] = 1;
        rows.push_back(a);
        rhs.push_back(0);
    }
    const int m = static_cast<int>(rows.size());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < s; ++i)
        c[n + i] = qp.c_reg;

    ActiveSetResult best;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> act;
        for (int j = 0; j < m; ++j)
            if ((mask >> j) & 1u)
                act.push_back(j);
        const int na = static_cast<int>(act.size());
        // [H  -A^T] [x]   [-c]
        // [A   0  ] [l] = [ b]
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nv + na, nv + na);
        Eigen::VectorXd r = Eigen::VectorXd::Zero(nv + na);
        for (int k = 0; k < n; ++k)
            kkt(k, k) = 1;
        r.head(nv) = -c;
        for (int j = 0; j < na; ++j) {
            kkt.block(0, nv + j, nv, 1) = -rows[act[j]];
            kkt.block(nv + j, 0, 1, nv) = rows[act[j]].transpose();
            r[nv + j] = rhs[act[j]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (lu.rank() < nv + na)
            continue;
        const Eigen::VectorXd sol = lu.solve(r);
        const Eigen::VectorXd x = sol.head(nv);
        bool ok = true;
        for (int j = 0; j < na && ok; ++j)
            ok = sol[nv + j] >= -1e-10;
        for (int j = 0; j < m && ok; ++j)
            ok = rows[j].dot(x) >= rhs[j] - 1e-10;
        if (!ok)
            continue;
        const double obj = 0.5 * x.head(n).squaredNorm() + c.dot(x);
        if (obj < best.objective) {
            best.objective = obj;
            best.w = x.head(n);
        }
    }
    return best;
}

// Exhaustive argmin over every location, viewpoint and labelling of
// dot(w, Psi(y)) - loss(y_gt, y), using the feature assembly and the loss.
struct ExhaustiveResult {
    Label y;
    double objective = std::numeric_limits<double>::infinity();
};

inline ExhaustiveResult exhaustive_loss_augmented(const RandomScene& s, const WeightVector& w, const Label& y_gt) {
    ExhaustiveResult best;
    for (const auto& loc : search_locations(s.pyr, w.layout())) {
        const int n = w.layout().shape(loc.viewpoint).cells();
        for (unsigned m = 0; m < (1u << n); ++m) {
            const Label y{loc.p, bits_of(m, n), loc.viewpoint};
            const double obj = assemble_features(s.pyr, s.seg, y, w.layout()).dot(w) -
                               loss(y_gt, y, w.layout(), s.pyr.geometry).total;
            if (obj < best.objective) {
                best.objective = obj;
                best.y = y;
            }
        }
    }
    return best;
}

}  // namespace occseg::testing
