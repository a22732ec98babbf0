#include <gtest/gtest.h>

#include <random>

#include "occseg/hop.hpp"

using namespace occseg;

TEST(Hop, CliqueStatsSplitBetweenNeighbouringBins) {
    const auto a = clique_stats(2, 4, 4);
    EXPECT_EQ(a, (std::vector<double>{0, 0, 1, 0, 0}));
    // m = 1 of M = 3 with K = 4: t = 4/3, split 2/3 to bin 1 and 1/3 to bin 2.
    const auto b = clique_stats(1, 3, 4);
    EXPECT_NEAR(b[1], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(b[2], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(b[0] + b[3] + b[4], 0.0);
    EXPECT_EQ(clique_stats(0, 7, 4)[0], 1.0);
    EXPECT_EQ(clique_stats(7, 7, 4)[4], 1.0);
    EXPECT_THROW(clique_stats(4, 3, 4), ArgumentError);
    EXPECT_THROW(clique_stats(0, 0, 4), ArgumentError);
}

TEST(Hop, StatsSumToOneAndRecoverTheCount) {
    for (int M = 1; M <= 12; ++M)
        for (int m = 0; m <= M; ++m) {
            const auto th = clique_stats(m, M, 4);
            double sum = 0, mean = 0;
            for (int k = 0; k <= 4; ++k) {
                sum += th[k];
                mean += k * th[k];
            }
            EXPECT_NEAR(sum, 1.0, 1e-15);
            EXPECT_NEAR(mean, 4.0 * m / M, 1e-12);
        }
}

TEST(Hop, EnvelopeOfWorkedExampleMatchesWeightsAtIntegerCounts) {
    const std::vector<double> w = {0, 1, 1.5, 1.5, 1};
    const HopEnvelope env = hop_envelope(w, 4, 4);
    EXPECT_TRUE(env.concave);
    for (int m = 0; m <= 4; ++m)
        EXPECT_NEAR(env(m), w[m], 1e-12);
    EXPECT_EQ(env.slopes, (std::vector<double>{1, 0.5, 0, -0.5}));
}

TEST(Hop, EnvelopeEqualsInterpolatedPotentialForConcaveWeights) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const int K = 2 + static_cast<int>(rng() % 5);
        std::vector<double> inc(static_cast<std::size_t>(K));
        for (auto& d : inc)
            d = n(rng);
        std::sort(inc.begin(), inc.end(), std::greater<>());
        std::vector<double> w = {n(rng)};
        for (double d : inc)
            w.push_back(w.back() + d);
        const int M = 1 + static_cast<int>(rng() % 15);
        const HopEnvelope env = hop_envelope(w, M, K);
        for (int m = 0; m <= M; ++m) {
            // Direct linear interpolation at t = m K / M.
            const double t = static_cast<double>(m) * K / M;
            const int lo = std::min(static_cast<int>(t), K - 1);
            const double expect = w[lo] + (t - lo) * (w[lo + 1] - w[lo]);
            EXPECT_NEAR(env(m), expect, 1e-9);
            EXPECT_NEAR(hop_potential(w, m, M), expect, 1e-9);
        }
    }
}

TEST(Hop, ConcavityCheck) {
    EXPECT_TRUE(is_concave(std::vector<double>{0, 1, 1.5, 1.5, 1}));
    EXPECT_TRUE(is_concave(std::vector<double>{2, 2, 2}));
    EXPECT_FALSE(is_concave(std::vector<double>{0, 0, 1}));
    EXPECT_FALSE(hop_envelope(std::vector<double>{0, -1, 0}, 3, 2).concave);
    EXPECT_THROW(hop_envelope(std::vector<double>{0, 1}, 3, 2), ArgumentError);
}
