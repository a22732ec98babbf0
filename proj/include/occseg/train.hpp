#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include "detect.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "image.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "pyramid.hpp"
#include "qp.hpp"
#include "segmentation.hpp"

namespace occseg {

// One annotated image with its features precomputed.
struct TrainingSample {
    FeaturePyramid pyramid;
    SegmentCells segments;
    Label y_gt;
};

inline TrainingSample make_sample(const RasterImage& img, const Label& y_gt, const SegmentMap& seg,
                                  int cell_size = kDefaultCellSize, int levels = kDefaultLevels,
                                  double scale_step = kDefaultScaleStep) {
    TrainingSample s;
    s.pyramid = build_pyramid(img, scale_step, levels, cell_size);
    s.segments = project_segments(seg, s.pyramid);
    s.y_gt = y_gt;
    return s;
}

struct TrainOptions {
    double c_reg = 25.0;
    double epsilon = 1e-3;
    int max_iters = 200;
    bool freeze_hop = false;  // pin w_HOP to zero (ablation)
    QpOptions qp;
};

struct IterationLog {
    int iteration = 0;
    std::size_t constraints = 0;  // total working-set size after the iteration
    double objective = 0;         // QP primal value
    double dual = 0;              // QP dual value
    double max_violation = 0;     // largest violation beyond the current slack
};

struct TrainResult {
    WeightVector w;
    bool converged = false;
    int iterations = 0;
    std::vector<IterationLog> log;
};

// Concavity of every w_HOP and W >= 0 for all viewpoints of the layout.
inline WeightCone training_cone(const ModelLayout& layout, bool freeze_hop) {
    WeightCone cone;
    for (int a = 0; a < layout.num_viewpoints(); ++a) {
        const std::size_t base = layout.block_offset(a);
        const std::size_t hop = base + layout.hop_offset(a);
        if (freeze_hop) {
            for (int k = 0; k <= layout.clique_size; ++k)
                cone.zero.push_back(hop + static_cast<std::size_t>(k));
        } else {
            cone.concave.push_back({hop, static_cast<std::size_t>(layout.clique_size) + 1});
        }
        cone.nonnegative.push_back(base + layout.pairwise_offset(a));
    }
    return cone;
}

struct MostViolated {
    Label y_hat;
    LossValue loss;
    std::vector<double> g;  // Psi(y_hat) - Psi(y_gt), dense
    double violation = 0;   // loss - w . g
};

inline MostViolated find_mvc(const TrainingSample& s, const WeightVector& w) {
    const Detection d = loss_augmented_detect(s.pyramid, s.segments, w, s.y_gt);
    MostViolated out;
    out.y_hat = d.y;
    out.loss = loss(s.y_gt, d.y, w.layout(), s.pyramid.geometry);
    const JointFeature gt = assemble_features(s.pyramid, s.segments, s.y_gt, w.layout());
    const JointFeature hat = assemble_features(s.pyramid, s.segments, d.y, w.layout());
    out.g = hat.dense();
    for (std::size_t i = 0; i < gt.block.size(); ++i)
        out.g[gt.offset + i] -= gt.block[i];
    out.violation = out.loss.total - dot(out.g, w.values());
    return out;
}

using IterationCallback = std::function<void(const IterationLog&)>;

// n-slack cutting-plane training. Each round adds, per sample, the most
// violated label when it beats the sample's current slack by more than
// epsilon, then re-solves the restricted QP warm-started from the previous
// multipliers. Stops when a round adds nothing or after max_iters rounds.
inline TrainResult train(const std::vector<TrainingSample>& samples, const ModelLayout& layout,
                         const TrainOptions& opt = {}, const IterationCallback& on_iteration = {}) {
    layout.validate();
    if (samples.empty())
        throw ArgumentError("train: no training samples");
    if (!(opt.c_reg > 0))
        throw ArgumentError("train: regularisation constant must be positive");
    if (!(opt.epsilon > 0))
        throw ArgumentError("train: epsilon must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        check_label(s.y_gt, layout);
        if (s.pyramid.geometry.cell_size != layout.cell_size)
            throw ArgumentError("train: sample cell size differs from the model layout");
        if (s.y_gt.p.level < 0 || s.y_gt.p.level >= s.pyramid.num_levels())
            throw ArgumentError("train: sample " + std::to_string(i) + " is annotated at level " +
                                std::to_string(s.y_gt.p.level) + " but its pyramid has " +
                                std::to_string(s.pyramid.num_levels()) + " levels");
    }

    QpSolver qp(layout.total_length(), static_cast<int>(samples.size()), opt.c_reg,
                training_cone(layout, opt.freeze_hop));

    TrainResult result;
    result.w = WeightVector(layout);
    double objective = 0, dual = 0;

    for (int iter = 1; iter <= opt.max_iters; ++iter) {
        std::vector<double> slack(samples.size(), 0.0);
        for (const auto& row : qp.rows())
            slack[row.sample] = std::max(slack[row.sample], row.loss - dot(row.g, result.w.values()));

        double worst = -std::numeric_limits<double>::infinity();
        std::size_t added = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            MostViolated mvc = find_mvc(samples[i], result.w);
            const double excess = mvc.violation - slack[i];
            worst = std::max(worst, excess);
            if (excess > opt.epsilon) {
                qp.add_row({static_cast<int>(i), std::move(mvc.g), mvc.loss.total});
                ++added;
            }
        }

        if (added > 0) {
            QpSolution sol = qp.solve(opt.qp);
            objective = sol.primal;
            dual = sol.dual;
            result.w = WeightVector::unpack(layout, std::move(sol.w));
        }
        IterationLog entry{iter, qp.num_rows(), objective, dual, worst};
        result.log.push_back(entry);
        result.iterations = iter;
        if (on_iteration)
            on_iteration(entry);
        if (added == 0) {
            result.converged = true;
            break;
        }
    }
    return result;
}

// Trains several objects as viewpoint components of one model and splits
// the result back into one weight vector per object. Every object must share
// K and the cell size.
inline std::vector<WeightVector> joint_train_multi(const std::vector<std::vector<TrainingSample>>& per_object,
                                                   const std::vector<ModelLayout>& layouts,
                                                   const TrainOptions& opt = {},
                                                   TrainResult* joint_result = nullptr) {
    if (per_object.size() != layouts.size() || layouts.empty())
        throw ArgumentError("joint_train_multi: one layout per object is required");
    ModelLayout joint;
    joint.clique_size = layouts.front().clique_size;
    joint.cell_size = layouts.front().cell_size;
    std::vector<int> first_vp;
    for (const auto& l : layouts) {
        l.validate();
        if (l.clique_size != joint.clique_size || l.cell_size != joint.cell_size)
            throw ArgumentError("joint_train_multi: objects disagree on K or cell size");
        first_vp.push_back(joint.num_viewpoints());
        joint.shapes.insert(joint.shapes.end(), l.shapes.begin(), l.shapes.end());
    }
    std::vector<TrainingSample> all;
    for (std::size_t o = 0; o < per_object.size(); ++o) {
        for (const auto& s : per_object[o]) {
            all.push_back(s);
            all.back().y_gt.viewpoint += first_vp[o];
        }
    }
    TrainResult res = train(all, joint, opt);
    std::vector<WeightVector> out;
    for (std::size_t o = 0; o < layouts.size(); ++o) {
        const std::size_t begin = joint.block_offset(first_vp[o]);
        const std::size_t len = layouts[o].total_length();
        const auto flat = res.w.values().subspan(begin, len);
        out.push_back(WeightVector::unpack(layouts[o], std::vector<double>(flat.begin(), flat.end())));
    }
    if (joint_result)
        *joint_result = std::move(res);
    return out;
}

}  // namespace occseg
