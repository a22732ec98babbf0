#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace occseg;
using namespace occseg::testing;

namespace {

std::vector<TrainingSample> random_samples(std::mt19937_64& rng, const ModelLayout& layout, int n) {
    std::vector<TrainingSample> out;
    for (int i = 0; i < n; ++i) {
        RandomScene s = random_scene(rng, 4, 3, 1, 2);
        TrainingSample t;
        t.pyramid = std::move(s.pyr);
        t.segments = std::move(s.seg);
        t.y_gt = {{integer(rng, 0, 2), integer(rng, 0, 1), 0}, random_bits(rng, layout.shape(0).cells()), 0};
        out.push_back(std::move(t));
    }
    return out;
}

// Structured hinge objective evaluated with the exhaustive loss-augmented
// oracle instead of the working set.
double true_objective(const std::vector<TrainingSample>& samples, const WeightVector& w, double c) {
    double obj = 0.5 * dot(w.values(), w.values());
    for (const auto& s : samples) {
        RandomScene scene{s.pyramid, s.segments};
        const ExhaustiveResult r = exhaustive_loss_augmented(scene, w, s.y_gt);
        const double gt = assemble_features(s.pyramid, s.segments, s.y_gt, w.layout()).dot(w);
        obj += c * std::max(0.0, gt - r.objective);
    }
    return obj;
}

}  // namespace

TEST(Train, ConvergesToTheStructuredHingeOptimum) {
    std::mt19937_64 rng(1);
    ModelLayout layout;
    layout.shapes = {{2, 2}};
    const auto samples = random_samples(rng, layout, 4);
    TrainOptions opt;
    opt.c_reg = 2.0;
    opt.epsilon = 1e-4;
    const TrainResult r = train(samples, layout, opt);
    ASSERT_TRUE(r.converged);
    for (std::size_t i = 1; i < r.log.size(); ++i)
        EXPECT_GE(r.log[i].objective, r.log[i - 1].objective - 1e-9);
    EXPECT_LE(r.log.back().max_violation, opt.epsilon);
    // With every violated constraint within epsilon, the restricted optimum is
    // within C n epsilon of the full objective at the same w.
    const double full = true_objective(samples, r.w, opt.c_reg);
    EXPECT_GE(full, r.log.back().objective - 1e-7);
    EXPECT_LE(full, r.log.back().objective + opt.c_reg * samples.size() * opt.epsilon + 1e-7);
    // Cone feasibility of the returned weights.
    const auto vw = r.w.viewpoint(0);
    EXPECT_GE(vw.pairwise, 0.0);
    EXPECT_TRUE(is_concave(vw.hop, 1e-9));
}

TEST(Train, FrozenHopStaysZero) {
    std::mt19937_64 rng(2);
    ModelLayout layout;
    layout.shapes = {{2, 2}};
    const auto samples = random_samples(rng, layout, 3);
    TrainOptions opt;
    opt.freeze_hop = true;
    const TrainResult r = train(samples, layout, opt);
    for (double h : r.w.viewpoint(0).hop)
        EXPECT_EQ(h, 0.0);
}

TEST(Train, MostViolatedRowIsConsistent) {
    std::mt19937_64 rng(3);
    ModelLayout layout;
    layout.shapes = {{2, 2}};
    const auto samples = random_samples(rng, layout, 1);
    const WeightVector w = random_weights(rng, layout, 0.2);
    const MostViolated m = find_mvc(samples[0], w);
    const double gt = assemble_features(samples[0].pyramid, samples[0].segments, samples[0].y_gt, layout).dot(w);
    const double hat = assemble_features(samples[0].pyramid, samples[0].segments, m.y_hat, layout).dot(w);
    EXPECT_NEAR(dot(m.g, w.values()), hat - gt, 1e-9);
    EXPECT_NEAR(m.violation, m.loss.total - (hat - gt), 1e-9);
    EXPECT_GE(m.violation, -1e-12);  // the ground truth itself has zero violation
}

TEST(Train, JointTrainingSplitsPerObject) {
    std::mt19937_64 rng(4);
    ModelLayout a, b;
    a.shapes = {{2, 2}};
    b.shapes = {{2, 2}};
    const auto sa = random_samples(rng, a, 2);
    const auto sb = random_samples(rng, b, 2);
    TrainResult joint;
    const auto ws = joint_train_multi({sa, sb}, {a, b}, {}, &joint);
    ASSERT_EQ(ws.size(), 2u);
    EXPECT_EQ(ws[0].layout(), a);
    EXPECT_EQ(ws[1].layout(), b);
    const auto flat = joint.w.values();
    for (std::size_t k = 0; k < a.total_length(); ++k) {
        EXPECT_EQ(ws[0].values()[k], flat[k]);
        EXPECT_EQ(ws[1].values()[k], flat[a.total_length() + k]);
    }
}

TEST(Train, RejectsBadInput) {
    ModelLayout layout;
    layout.shapes = {{2, 2}};
    EXPECT_THROW(train({}, layout), ArgumentError);
    std::mt19937_64 rng(5);
    auto samples = random_samples(rng, layout, 1);
    TrainOptions opt;
    opt.c_reg = 0;
    EXPECT_THROW(train(samples, layout, opt), ArgumentError);
    samples[0].y_gt.v.pop_back();
    EXPECT_THROW(train(samples, layout), ArgumentError);
}
