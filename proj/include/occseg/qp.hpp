#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "errors.hpp"

namespace occseg {

// Closed convex cone the weights must stay in: listed blocks have
// nonpositive second differences (concave), listed coordinates are
// nonnegative or pinned to zero. Everything else is free.
struct WeightCone {
    struct ConcaveBlock {
        std::size_t offset = 0;
        std::size_t length = 0;
    };
    std::vector<ConcaveBlock> concave;
    std::vector<std::size_t> nonnegative;
    std::vector<std::size_t> zero;
};

namespace detail {

// Solves the small SPD system A x = b in place (Cholesky). A is n x n row-major.
inline bool solve_spd(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k)
            d -= a[j * n + k] * a[j * n + k];
        if (!(d > 1e-300))
            return false;
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k)
            s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return true;
}

}  // namespace detail

// Euclidean projection of x onto {x : x[k-1] - 2 x[k] + x[k+1] <= 0}. Solved
// exactly through the nonnegative least-squares dual
//   min_{lambda >= 0} || x + D^T lambda ||,   D row k = (-1, 2, -1) at k-1..k+1
// with the Lawson-Hanson active-set method; the projection is x + D^T lambda.
inline void project_concave(std::span<double> x) {
    const std::size_t n = x.size();
    if (n < 3)
        return;
    const std::size_t r = n - 2;
    // (D D^T) is pentadiagonal: 6 on the diagonal, -4 and 1 off it.
    auto gram = [](std::size_t i, std::size_t j) {
        const std::size_t d = i > j ? i - j : j - i;
        return d == 0 ? 6.0 : d == 1 ? -4.0 : d == 2 ? 1.0 : 0.0;
    };
    // (D x)_k
    auto second_diff = [&](std::span<const double> y, std::size_t k) {
        return -y[k] + 2 * y[k + 1] - y[k + 2];
    };
    const std::vector<double> v(x.begin(), x.end());
    std::vector<double> lambda(r, 0.0);
    std::vector<bool> passive(r, false);
    std::vector<double> y(v);

    auto apply = [&](const std::vector<double>& lam) {
        std::vector<double> out(v);
        for (std::size_t k = 0; k < r; ++k) {
            out[k] -= lam[k];
            out[k + 1] += 2 * lam[k];
            out[k + 2] -= lam[k];
        }
        return out;
    };

    const double tol = 1e-13 * (1.0 + *std::max_element(v.begin(), v.end(), [](double a, double b) {
        return std::abs(a) < std::abs(b);
    }));
    for (std::size_t outer = 0; outer < 4 * r + 4; ++outer) {
        // Gradient of the dual objective: -D y. A violated row has D y < 0.
        std::size_t best = r;
        double best_val = tol;
        for (std::size_t k = 0; k < r; ++k) {
            if (passive[k])
                continue;
            const double g = -second_diff(y, k);
            if (g > best_val) {
                best_val = g;
                best = k;
            }
        }
        if (best == r)
            break;
        passive[best] = true;

        for (std::size_t inner = 0; inner < 4 * r + 4; ++inner) {
            std::vector<std::size_t> idx;
            for (std::size_t k = 0; k < r; ++k)
                if (passive[k])
                    idx.push_back(k);
            const std::size_t m = idx.size();
            std::vector<double> a(m * m), b(m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j)
                    a[i * m + j] = gram(idx[i], idx[j]);
                b[i] = -second_diff(v, idx[i]);
            }
            detail::solve_spd(a, b, m);
            std::vector<double> s(r, 0.0);
            bool positive = true;
            for (std::size_t i = 0; i < m; ++i) {
                s[idx[i]] = b[i];
                if (b[i] <= 0)
                    positive = false;
            }
            if (positive) {
                lambda = s;
                break;
            }
            double alpha = 1.0;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t k = idx[i];
                if (s[k] <= 0)
                    alpha = std::min(alpha, lambda[k] / (lambda[k] - s[k]));
            }
            for (std::size_t k = 0; k < r; ++k) {
                lambda[k] += alpha * (s[k] - lambda[k]);
                if (passive[k] && lambda[k] <= 1e-15) {
                    passive[k] = false;
                    lambda[k] = 0;
                }
            }
        }
        y = apply(lambda);
    }
    std::copy(y.begin(), y.end(), x.begin());
}

// The concave blocks, nonnegative and zero coordinates must be disjoint, which
// makes the projection separable.
inline void project_onto_cone(std::span<double> w, const WeightCone& cone) {
    for (const auto& block : cone.concave)
        project_concave(w.subspan(block.offset, block.length));
    for (std::size_t k : cone.nonnegative)
        w[k] = std::max(w[k], 0.0);
    for (std::size_t k : cone.zero)
        w[k] = 0.0;
}

// One margin constraint  w . g + xi_sample >= loss.
struct QpRow {
    int sample = 0;
    std::vector<double> g;
    double loss = 0;
};

// min_w 1/2 ||w||^2 + c_reg * sum_i xi_i
//   s.t. w . g_j + xi_{sample(j)} >= loss_j   for every row j
//        xi_i >= 0,  w in cone
struct QpProblem {
    std::size_t dim = 0;
    int num_samples = 0;
    double c_reg = 1.0;
    std::vector<QpRow> rows;
    WeightCone cone;
};

struct QpOptions {
    double kkt_tolerance = 1e-9;  // largest dual gradient violation
    long max_sweeps = 1'000'000;
};

struct QpSolution {
    std::vector<double> w;
    std::vector<double> alpha;  // one multiplier per margin row
    double primal = 0;
    double dual = 0;
    long sweeps = 0;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double qp_primal(const QpProblem& qp, std::span<const double> w) {
    std::vector<double> xi(static_cast<std::size_t>(qp.num_samples), 0.0);
    for (const auto& row : qp.rows)
        xi[row.sample] = std::max(xi[row.sample], row.loss - dot(row.g, w));
    return 0.5 * dot(w, w) + qp.c_reg * std::accumulate(xi.begin(), xi.end(), 0.0);
}

// Dual solver kept alive across cutting-plane rounds. Every linear cone
// constraint c . w >= 0 (one per second difference of a concave block, one
// per nonnegative coordinate) gets a multiplier mu >= 0, every margin row a
// multiplier alpha >= 0 with sum per sample <= c_reg, and
//   w = sum alpha_j g_j + sum mu_r c_r.
// The dual  sum alpha_j loss_j - 1/2 ||w||^2  is maximised by exact
// coordinate steps on the cached Gram matrix: single steps for mu, pair
// steps (SMO) inside each sample's simplex for alpha. Pinned coordinates are
// removed from the rows up front.
class QpSolver {
public:
    QpSolver(std::size_t dim, int num_samples, double c_reg, WeightCone cone)
        : dim_(dim), num_samples_(num_samples), c_reg_(c_reg), cone_(std::move(cone)), pinned_(dim, false) {
        if (num_samples < 1 || !(c_reg > 0))
            throw ArgumentError("QpSolver: need at least one sample and c_reg > 0");
        std::vector<bool> claimed(dim, false);
        auto claim = [&](std::size_t k) {
            check_index(k);
            if (claimed[k])
                throw ArgumentError("QpSolver: cone constraints overlap at coordinate " + std::to_string(k));
            claimed[k] = true;
        };
        for (std::size_t k : cone_.zero) {
            claim(k);
            pinned_[k] = true;
        }
        for (const auto& b : cone_.concave) {
            if (b.offset + b.length > dim)
                throw ArgumentError("QpSolver: concave block exceeds dimension");
            for (std::size_t k = 0; k < b.length; ++k)
                claim(b.offset + k);
        }
        for (std::size_t k : cone_.nonnegative)
            claim(k);
        for (const auto& b : cone_.concave) {
            for (std::size_t k = 0; k + 2 < b.length; ++k)
                add_cone_row({{b.offset + k, -1.0}, {b.offset + k + 1, 2.0}, {b.offset + k + 2, -1.0}});
        }
        for (std::size_t k : cone_.nonnegative)
            add_cone_row({{k, 1.0}});
        by_sample_.resize(static_cast<std::size_t>(num_samples));
    }

    std::size_t dim() const { return dim_; }
    std::size_t num_rows() const { return rows_.size(); }
    const std::vector<QpRow>& rows() const { return rows_; }
    const WeightCone& cone() const { return cone_; }

    void add_row(QpRow row) {
        if (row.g.size() != dim_ || row.sample < 0 || row.sample >= num_samples_)
            throw ArgumentError("solve_qp: malformed margin row");
        for (std::size_t k = 0; k < dim_; ++k)
            if (pinned_[k])
                row.g[k] = 0.0;
        const std::size_t idx = q_.size();
        std::vector<double> col(idx + 1);
        for (std::size_t r = 0; r < cone_rows_.size(); ++r)
            col[r] = sparse_dot(cone_rows_[r], row.g);
        for (std::size_t j = 0; j < rows_.size(); ++j)
            col[cone_rows_.size() + j] = dot(rows_[j].g, row.g);
        col[idx] = dot(row.g, row.g);
        for (std::size_t k = 0; k < idx; ++k)
            q_[k].push_back(col[k]);
        q_.push_back(std::move(col));
        z_.push_back(0.0);
        b_.push_back(row.loss);
        by_sample_[row.sample].push_back(idx);
        rows_.push_back(std::move(row));
    }

    // Optional warm start for the margin multipliers, rescaled to be feasible.
    void set_alpha(std::span<const double> alpha) {
        for (std::size_t j = 0; j < rows_.size() && j < alpha.size(); ++j)
            z_[cone_rows_.size() + j] = std::max(alpha[j], 0.0);
        for (const auto& vars : by_sample_) {
            double s = 0;
            for (std::size_t v : vars)
                s += z_[v];
            if (s > c_reg_)
                for (std::size_t v : vars)
                    z_[v] *= c_reg_ / s;
        }
    }

    QpSolution solve(const QpOptions& opt = {}) {
        const std::size_t n_var = q_.size();
        const std::size_t n_cone = cone_rows_.size();
        std::vector<double> grad(n_var);
        for (std::size_t a = 0; a < n_var; ++a) {
            double s = b_[a];
            for (std::size_t c = 0; c < n_var; ++c)
                s -= q_[a][c] * z_[c];
            grad[a] = s;
        }
        auto move = [&](std::size_t var, double delta) {
            z_[var] += delta;
            const auto& col = q_[var];
            for (std::size_t a = 0; a < n_var; ++a)
                grad[a] -= delta * col[a];
        };

        QpSolution sol;
        double worst = 0;
        long sweep = 0;
        for (sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
            worst = 0;
            for (std::size_t r = 0; r < n_cone; ++r) {
                const double g = grad[r];
                worst = std::max(worst, z_[r] > 0 ? std::abs(g) : g);
                const double target = std::max(0.0, z_[r] + g / q_[r][r]);
                if (target != z_[r])
                    move(r, target - z_[r]);
            }
            for (const auto& vars : by_sample_) {
                if (vars.empty())
                    continue;
                for (int step = 0; step < 8; ++step) {
                    double slack = c_reg_;
                    for (std::size_t v : vars)
                        slack -= z_[v];
                    // `up` gains mass, `down` loses it; n_var stands for the slack.
                    std::size_t up = n_var, down = n_var;
                    double g_up = 0.0;
                    double g_down = slack > 1e-12 * c_reg_ ? 0.0 : std::numeric_limits<double>::infinity();
                    for (std::size_t v : vars) {
                        if (grad[v] > g_up) {
                            g_up = grad[v];
                            up = v;
                        }
                        if (z_[v] > 0 && grad[v] < g_down) {
                            g_down = grad[v];
                            down = v;
                        }
                    }
                    const double gap = g_up - g_down;
                    if (step == 0)
                        worst = std::max(worst, gap);
                    if (!(gap > 0.1 * opt.kkt_tolerance) || up == down)
                        break;
                    double curv = 0;
                    if (up != n_var)
                        curv += q_[up][up];
                    if (down != n_var)
                        curv += q_[down][down];
                    if (up != n_var && down != n_var)
                        curv -= 2 * q_[up][down];
                    const double cap = down == n_var ? std::max(slack, 0.0) : z_[down];
                    const double t = curv > 0 ? std::min(gap / curv, cap) : cap;
                    if (!(t > 0))
                        break;
                    if (up != n_var)
                        move(up, t);
                    if (down != n_var) {
                        if (t == cap) {
                            const double rest = z_[down];
                            move(down, -rest);
                            z_[down] = 0.0;
                        } else {
                            move(down, -t);
                        }
                    }
                }
            }
            if (worst <= opt.kkt_tolerance)
                break;
        }
        if (sweep > opt.max_sweeps)
            throw ConvergenceError("solve_qp: no convergence within sweep cap", worst);

        std::vector<double> w(dim_, 0.0);
        for (std::size_t r = 0; r < n_cone; ++r)
            for (const auto& [k, c] : cone_rows_[r])
                w[k] += z_[r] * c;
        for (std::size_t j = 0; j < rows_.size(); ++j) {
            const double a = z_[n_cone + j];
            if (a != 0)
                for (std::size_t k = 0; k < dim_; ++k)
                    w[k] += a * rows_[j].g[k];
        }
        double lin = 0;
        for (std::size_t j = 0; j < rows_.size(); ++j)
            lin += z_[n_cone + j] * b_[n_cone + j];
        sol.dual = lin - 0.5 * dot(w, w);
        // The multipliers satisfy the cone rows only to tolerance; the final
        // exact projection makes w feasible.
        project_onto_cone(w, cone_);
        sol.w = std::move(w);
        sol.alpha.assign(z_.begin() + static_cast<std::ptrdiff_t>(n_cone), z_.end());
        sol.sweeps = sweep;
        double primal_slack = 0;
        std::vector<double> xi(static_cast<std::size_t>(num_samples_), 0.0);
        for (const auto& row : rows_)
            xi[row.sample] = std::max(xi[row.sample], row.loss - dot(row.g, sol.w));
        for (double x : xi)
            primal_slack += x;
        sol.primal = 0.5 * dot(sol.w, sol.w) + c_reg_ * primal_slack;
        return sol;
    }

private:
    using SparseRow = std::vector<std::pair<std::size_t, double>>;

    void check_index(std::size_t k) const {
        if (k >= dim_)
            throw ArgumentError("QpSolver: cone coordinate exceeds dimension");
    }

    static double sparse_dot(const SparseRow& a, std::span<const double> x) {
        double s = 0;
        for (const auto& [k, c] : a)
            s += c * x[k];
        return s;
    }

    void add_cone_row(SparseRow row) {
        std::erase_if(row, [&](const auto& e) { return pinned_[e.first]; });
        if (row.empty())
            return;
        const std::size_t idx = q_.size();
        std::vector<double> col(idx + 1);
        for (std::size_t r = 0; r < idx; ++r) {
            double s = 0;
            for (const auto& [k, c] : row)
                for (const auto& [k2, c2] : cone_rows_[r])
                    if (k == k2)
                        s += c * c2;
            col[r] = s;
        }
        double self = 0;
        for (const auto& e : row)
            self += e.second * e.second;
        col[idx] = self;
        for (std::size_t k = 0; k < idx; ++k)
            q_[k].push_back(col[k]);
        q_.push_back(std::move(col));
        z_.push_back(0.0);
        b_.push_back(0.0);
        cone_rows_.push_back(std::move(row));
    }

    std::size_t dim_;
    int num_samples_;
    double c_reg_;
    WeightCone cone_;
    std::vector<bool> pinned_;
    std::vector<SparseRow> cone_rows_;
    std::vector<QpRow> rows_;
    std::vector<std::vector<std::size_t>> by_sample_;  // variable indices per sample
    std::vector<std::vector<double>> q_;               // Gram matrix, cone rows first
    std::vector<double> z_;                            // multipliers
    std::vector<double> b_;                            // linear dual term
};

inline QpSolution solve_qp(const QpProblem& qp, std::span<const double> warm_alpha = {},
                           const QpOptions& opt = {}) {
    QpSolver solver(qp.dim, qp.num_samples, qp.c_reg, qp.cone);
    for (const auto& row : qp.rows)
        solver.add_row(row);
    solver.set_alpha(warm_alpha);
    return solver.solve(opt);
}

}  // namespace occseg
