#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace occseg;
using namespace occseg::testing;

namespace {

QpProblem random_problem(std::mt19937_64& rng, bool with_cone) {
    QpProblem qp;
    qp.dim = static_cast<std::size_t>(integer(rng, 2, 6));
    qp.num_samples = integer(rng, 1, 2);
    qp.c_reg = uniform(rng, 0.2, 5.0);
    const int n_rows = integer(rng, 1, 4);
    for (int j = 0; j < n_rows; ++j) {
        QpRow r;
        r.sample = integer(rng, 0, qp.num_samples - 1);
        for (std::size_t k = 0; k < qp.dim; ++k)
            r.g.push_back(normal(rng));
        r.loss = uniform(rng, 0.1, 1.0);
        qp.rows.push_back(r);
    }
    if (with_cone) {
        if (qp.dim >= 4)
            qp.cone.concave.push_back({0, 3});
        qp.cone.nonnegative.push_back(qp.dim - 1);
    }
    return qp;
}

}  // namespace

TEST(Qp, SingleConstraintClosedForm) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        QpProblem qp;
        qp.dim = 4;
        qp.num_samples = 1;
        qp.c_reg = uniform(rng, 0.1, 3.0);
        QpRow r{0, {}, uniform(rng, 0.1, 2.0)};
        for (int k = 0; k < 4; ++k)
            r.g.push_back(normal(rng));
        qp.rows.push_back(r);
        const double gg = dot(r.g, r.g);
        const double alpha = std::min(qp.c_reg, r.loss / gg);
        const QpSolution sol = solve_qp(qp);
        ASSERT_EQ(sol.alpha.size(), 1u);
        EXPECT_NEAR(sol.alpha[0], alpha, 1e-9);
        for (int k = 0; k < 4; ++k)
            EXPECT_NEAR(sol.w[k], alpha * r.g[k], 1e-9);
        EXPECT_NEAR(sol.primal, sol.dual, 1e-8);
    }
}

TEST(Qp, EmptyWorkingSetGivesZeroWeights) {
    QpProblem qp;
    qp.dim = 3;
    qp.num_samples = 2;
    const QpSolution sol = solve_qp(qp);
    EXPECT_EQ(sol.w, std::vector<double>(3, 0.0));
    EXPECT_EQ(sol.primal, 0.0);
}

TEST(Qp, MatchesActiveSetOracleWithoutCone) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const QpProblem qp = random_problem(rng, false);
        const ActiveSetResult ref = active_set_oracle(qp);
        const QpSolution sol = solve_qp(qp);
        EXPECT_NEAR(sol.primal, ref.objective, 1e-6 * std::max(1.0, ref.objective)) << "trial " << trial;
        for (std::size_t k = 0; k < qp.dim; ++k)
            EXPECT_NEAR(sol.w[k], ref.w[static_cast<int>(k)], 1e-4);
    }
}

TEST(Qp, MatchesActiveSetOracleWithCone) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const QpProblem qp = random_problem(rng, true);
        const ActiveSetResult ref = active_set_oracle(qp);
        const QpSolution sol = solve_qp(qp);
        EXPECT_NEAR(sol.primal, ref.objective, 1e-6 * std::max(1.0, ref.objective)) << "trial " << trial;
        for (std::size_t k = 0; k < qp.dim; ++k)
            EXPECT_NEAR(sol.w[k], ref.w[static_cast<int>(k)], 1e-4);
        if (qp.dim >= 4)
            EXPECT_LE(sol.w[0] - 2 * sol.w[1] + sol.w[2], 1e-12);
        EXPECT_GE(sol.w[qp.dim - 1], 0.0);
    }
}

TEST(Qp, PinnedCoordinatesStayZero) {
    std::mt19937_64 rng(4);
    QpProblem qp = random_problem(rng, false);
    qp.cone.zero = {0};
    const QpSolution sol = solve_qp(qp);
    EXPECT_EQ(sol.w[0], 0.0);
    // Same as solving without that coordinate.
    QpProblem reduced = qp;
    reduced.cone.zero.clear();
    for (auto& r : reduced.rows)
        r.g[0] = 0.0;
    EXPECT_NEAR(solve_qp(reduced).primal, sol.primal, 1e-8);
}

TEST(Qp, WarmStartReachesTheSameOptimum) {
    std::mt19937_64 rng(5);
    QpProblem qp = random_problem(rng, true);
    QpSolver solver(qp.dim, qp.num_samples, qp.c_reg, qp.cone);
    solver.add_row(qp.rows[0]);
    solver.solve();
    for (std::size_t j = 1; j < qp.rows.size(); ++j)
        solver.add_row(qp.rows[j]);
    const QpSolution warm = solver.solve();
    const QpSolution cold = solve_qp(qp);
    EXPECT_NEAR(warm.primal, cold.primal, 1e-8);
}

TEST(Qp, ProjectConcaveIsTheNearestConcaveSequence) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = integer(rng, 3, 7);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (auto& v : x)
            v = normal(rng);
        std::vector<double> p = x;
        project_concave(p);
        EXPECT_TRUE(is_concave(p, 1e-10));
        // Optimality: no random concave candidate is closer.
        double d = 0;
        for (int k = 0; k < n; ++k)
            d += (p[k] - x[k]) * (p[k] - x[k]);
        for (int c = 0; c < 200; ++c) {
            auto q = random_concave(rng, n - 1);
            for (int k = 0; k < n; ++k)
                q[k] = 0.5 * (q[k] + p[k]);  // concave combination near p
            double dq = 0;
            for (int k = 0; k < n; ++k)
                dq += (q[k] - x[k]) * (q[k] - x[k]);
            EXPECT_GE(dq, d - 1e-10);
        }
    }
}

TEST(Qp, RejectsOverlappingCone) {
    WeightCone cone;
    cone.concave.push_back({0, 3});
    cone.nonnegative.push_back(2);
    EXPECT_THROW(QpSolver(4, 1, 1.0, cone), ArgumentError);
    cone.nonnegative = {4};
    EXPECT_THROW(QpSolver(4, 1, 1.0, cone), ArgumentError);
}

TEST(Qp, RejectsMalformedRows) {
    QpProblem qp;
    qp.dim = 2;
    qp.num_samples = 1;
    qp.rows.push_back({0, {1.0}, 1.0});
    EXPECT_THROW(solve_qp(qp), ArgumentError);
    qp.rows = {{3, {1.0, 0.0}, 1.0}};
    EXPECT_THROW(solve_qp(qp), ArgumentError);
}
