#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "occseg/occseg.hpp"

namespace fs = std::filesystem;
using namespace occseg;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 0;

    RunConfig run;
};

struct SynthFlags {
    int n = 20;
    double max_occlusion = 0.5;
    int occluders = 2;
    double clutter = 0.5;
    int objects = 1;
    bool overlap = false;
    int width = 160;
    int height = 120;
    int shape_w = 6;
    int shape_h = 4;
    std::uint64_t texture_seed = 1;
};

struct RangeFlags {
    int begin = 0;
    int end = -1;

    std::vector<std::string> select(const Dataset& ds) const {
        const int n = static_cast<int>(ds.image_ids.size());
        const int e = end < 0 ? n : std::min(end, n);
        std::vector<std::string> out;
        for (int i = std::max(begin, 0); i < e; ++i)
            out.push_back(ds.image_ids[static_cast<std::size_t>(i)]);
        return out;
    }
};

struct TrainFlags {
    std::string data;
    RangeFlags range;
    int max_iters = -1;
    bool no_hop = false;
};

struct DetectFlags {
    std::vector<std::string> models;
    std::vector<std::string> images;
    std::string data;
    RangeFlags range;
    int top_n = 5;
    bool multi = false;
    bool overlays = true;
};

struct EvalFlags {
    std::string detections;
    std::string data;
    RangeFlags range;
    std::string mode = "det";
    bool refined = false;
    int object = 0;
    double iou_match = kDefaultMatchIou;
};

fs::path out_path(const Globals& g, const fs::path& rel) {
    const fs::path p = fs::path(g.out_dir) / rel;
    fs::create_directories(p.parent_path());
    return p;
}

FeaturePyramid pyramid_for(const RasterImage& img, const RunConfig& cfg) {
    return build_pyramid(img, cfg.scale_step, cfg.n_levels, cfg.cell_size);
}

int cmd_synth(const Globals& g, const SynthFlags& f) {
    SynthConfig cfg;
    cfg.n_images = f.n;
    cfg.seed = g.seed;
    cfg.object_texture_seed = f.texture_seed;
    cfg.occluder_count = f.occluders;
    cfg.max_occlusion = f.max_occlusion;
    cfg.clutter_level = f.clutter;
    cfg.n_objects = f.objects;
    cfg.overlap = f.overlap;
    cfg.width = f.width;
    cfg.height = f.height;
    cfg.shape = {f.shape_w, f.shape_h};
    cfg.cell_size = g.run.cell_size;
    cfg.scale_step = g.run.scale_step;
    cfg.max_level = std::min(4, g.run.n_levels - 1);
    cfg.segment_k = g.run.segment_k;
    cfg.segment_min_size = g.run.segment_min_size;
    const auto images = gen_synthetic(cfg);
    fs::create_directories(g.out_dir);
    write_dataset(g.out_dir, images, cfg);
    std::cout << "wrote " << images.size() << " images to " << g.out_dir << "\n";
    return 0;
}

// Shapes per object, indexed [object][viewpoint], taken from the annotations.
std::vector<ModelLayout> layouts_from(const Dataset& ds, const RunConfig& cfg) {
    std::map<int, std::map<int, ViewpointShape>> shapes;
    for (const auto& a : ds.annotations) {
        auto [it, fresh] = shapes[a.object].emplace(a.y.viewpoint, a.shape);
        if (!fresh && (it->second.w != a.shape.w || it->second.h != a.shape.h))
            throw ParseError("annotations: object " + std::to_string(a.object) + " viewpoint " +
                             std::to_string(a.y.viewpoint) + " has inconsistent shapes");
    }
    std::vector<ModelLayout> out;
    int expected = 0;
    for (const auto& [object, vps] : shapes) {
        if (object != expected++)
            throw ParseError("annotations: object ids must be 0..L-1 without gaps");
        ModelLayout l;
        l.clique_size = cfg.k;
        l.cell_size = cfg.cell_size;
        int a = 0;
        for (const auto& [vp, shape] : vps) {
            if (vp != a++)
                throw ParseError("annotations: viewpoints of object " + std::to_string(object) +
                                 " must be 0..A-1 without gaps");
            l.shapes.push_back(shape);
        }
        out.push_back(l);
    }
    if (out.empty())
        throw ParseError("annotations: no object instances");
    return out;
}

int cmd_train(const Globals& g, const TrainFlags& f) {
    const Dataset ds = load_dataset(f.data);
    const auto layouts = layouts_from(ds, g.run);
    const auto ids = f.range.select(ds);
    std::vector<std::vector<TrainingSample>> per_object(layouts.size());
    for (const auto& id : ids) {
        const RasterImage img = load_image(ds.image_path(id));
        const SegmentMap seg = segment_unsupervised(img, g.run.segment_k, g.run.segment_min_size);
        const FeaturePyramid pyr = pyramid_for(img, g.run);
        const SegmentCells cells = project_segments(seg, pyr);
        for (const Annotation* a : ds.objects_of(id)) {
            if (a->y.p.level >= pyr.num_levels())
                throw ArgumentError("train: image " + id + " is annotated at pyramid level " +
                                    std::to_string(a->y.p.level) + " but only " +
                                    std::to_string(pyr.num_levels()) + " levels are built (raise n_levels)");
            per_object[static_cast<std::size_t>(a->object)].push_back({pyr, cells, a->y});
        }
    }
    for (std::size_t o = 0; o < per_object.size(); ++o)
        if (per_object[o].empty())
            throw ArgumentError("train: object " + std::to_string(o) + " has no samples in the selected range");

    TrainOptions opt;
    opt.c_reg = g.run.c_reg;
    opt.epsilon = g.run.epsilon;
    opt.max_iters = f.max_iters >= 0 ? f.max_iters : g.run.max_iters;
    opt.freeze_hop = f.no_hop;

    // One joint model over all objects; a single object is the L = 1 case.
    ModelLayout joint;
    joint.clique_size = g.run.k;
    joint.cell_size = g.run.cell_size;
    std::vector<int> first_vp;
    for (const auto& l : layouts) {
        first_vp.push_back(joint.num_viewpoints());
        joint.shapes.insert(joint.shapes.end(), l.shapes.begin(), l.shapes.end());
    }
    std::vector<TrainingSample> all;
    for (std::size_t o = 0; o < per_object.size(); ++o)
        for (auto& s : per_object[o]) {
            all.push_back(std::move(s));
            all.back().y_gt.viewpoint += first_vp[o];
        }

    std::ofstream log(out_path(g, "train_log.csv"));
    log << "iteration,constraints,objective,dual,max_violation\n" << std::setprecision(12);
    const TrainResult res = train(all, joint, opt, [&](const IterationLog& e) {
        log << e.iteration << ',' << e.constraints << ',' << e.objective << ',' << e.dual << ','
            << e.max_violation << '\n';
        log.flush();
        std::cerr << "iteration " << e.iteration << ": constraints " << e.constraints << ", objective "
                  << e.objective << ", max violation " << e.max_violation << "\n";
    });

    for (std::size_t o = 0; o < layouts.size(); ++o) {
        const auto flat = res.w.values().subspan(joint.block_offset(first_vp[o]), layouts[o].total_length());
        const WeightVector w = WeightVector::unpack(layouts[o], {flat.begin(), flat.end()});
        const std::string name = layouts.size() == 1 ? "model.bin" : "model_" + std::to_string(o) + ".bin";
        save_model(w, out_path(g, name));
    }
    if (!res.converged) {
        std::cerr << "training did not converge within " << opt.max_iters << " iterations\n";
        return kExitNotConverged;
    }
    std::cout << "converged after " << res.iterations << " iterations\n";
    return 0;
}

int cmd_detect(const Globals& g, const DetectFlags& f) {
    std::vector<WeightVector> models;
    for (const auto& m : f.models)
        models.push_back(load_model(m));
    if (models.empty())
        throw ArgumentError("detect: at least one --model is required");
    for (const auto& m : models)
        if (m.layout().cell_size != models.front().layout().cell_size)
            throw ArgumentError("detect: models use different cell sizes");
    if (f.multi && models.size() < 2)
        throw ArgumentError("detect: --multi needs at least two models");
    RunConfig run = g.run;
    run.cell_size = models.front().layout().cell_size;

    std::vector<std::pair<std::string, fs::path>> inputs;
    for (const auto& p : f.images)
        inputs.emplace_back(fs::path(p).stem().string(), fs::path(p));
    if (!f.data.empty()) {
        const Dataset ds = load_dataset(f.data);
        for (const auto& id : f.range.select(ds))
            inputs.emplace_back(id, ds.image_path(id));
    }

    std::ofstream out(out_path(g, "detections.txt"));
    if (!out)
        throw IoError("cannot write detections file");
    for (const auto& [id, path] : inputs) {
        if (f.top_n == 0)
            break;
        const RasterImage img = load_image(path);
        const SegmentMap seg = segment_unsupervised(img, run.segment_k, run.segment_min_size);
        const FeaturePyramid pyr = pyramid_for(img, run);
        const SegmentCells cells = project_segments(seg, pyr);
        std::vector<OverlayItem> items;
        if (f.multi) {
            const MultiDetection md = detect_multi(pyr, cells, models, run.nms_iou);
            for (std::size_t o = 0; o < md.objects.size(); ++o) {
                const Detection& d = md.objects[o];
                out << format_detection({id, static_cast<int>(o), d.y, d.score}) << '\n';
                items.push_back(overlay_item(d.y, models[o].layout().shape(d.y.viewpoint), pyr.geometry, d.score,
                                             static_cast<int>(o)));
            }
            write_text(out_path(g, fs::path("ownership") / (id + ".txt")), format_ownership(md.state, pyr));
        } else {
            for (std::size_t o = 0; o < models.size(); ++o) {
                const auto dets = detect(pyr, cells, models[o], static_cast<std::size_t>(f.top_n), run.nms_iou);
                for (const auto& d : dets) {
                    out << format_detection({id, static_cast<int>(o), d.y, d.score}) << '\n';
                    items.push_back(overlay_item(d.y, models[o].layout().shape(d.y.viewpoint), pyr.geometry,
                                                 d.score, static_cast<int>(o)));
                }
            }
        }
        if (f.overlays)
            write_text(out_path(g, fs::path("overlays") / (id + ".svg")),
                       overlay_svg(fs::absolute(path), img.width, img.height, items));
    }
    return 0;
}

int cmd_eval(const Globals& g, const EvalFlags& f) {
    const Dataset ds = load_dataset(f.data);
    const auto dets = load_detections(f.detections);
    const auto ids = f.range.select(ds);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i)
        index[ids[i]] = i;
    for (const auto& d : dets)
        if (!index.count(d.image))
            throw ReferenceError("eval: detection for unknown image '" + d.image + "'");

    // Geometry of every evaluated image, from its size and the configured pyramid.
    auto geometry = [&](const RasterImage& img) {
        PyramidGeometry geo;
        geo.cell_size = g.run.cell_size;
        geo.base_width = img.width;
        geo.base_height = img.height;
        for (int l = 0; l < g.run.n_levels; ++l)
            geo.scales.push_back(std::pow(g.run.scale_step, l));
        return geo;
    };
    const auto layouts = layouts_from(ds, g.run);
    if (f.object < 0 || f.object >= static_cast<int>(layouts.size()))
        throw ArgumentError("eval: --object out of range");
    const ModelLayout& layout = layouts[static_cast<std::size_t>(f.object)];

    if (f.mode == "det") {
        std::vector<std::vector<ScoredBox>> boxes(ids.size());
        std::vector<std::vector<PixelRect>> gts(ids.size());
        std::map<std::string, PyramidGeometry> geos;
        for (const auto& id : ids) {
            geos[id] = geometry(load_image(ds.image_path(id)));
            for (const Annotation* a : ds.objects_of(id))
                if (a->object == f.object)
                    gts[index[id]].push_back(a->box);
        }
        for (const auto& d : dets) {
            if (d.object != f.object)
                continue;
            boxes[index[d.image]].push_back({box_pixels(geos[d.image], d.y.p, layout.shape(d.y.viewpoint)), d.score});
        }
        const EvalCurve curve = fppi_recall(boxes, gts, f.iou_match);
        std::ofstream csv(out_path(g, "curve.csv"));
        csv << "fppi,recall\n" << std::setprecision(12);
        for (const auto& p : curve.points)
            csv << p.fppi << ',' << p.recall << '\n';
        std::ofstream summary(out_path(g, "metrics.csv"));
        summary << "metric,value\n" << std::setprecision(12) << "auc," << curve.auc << "\nrecall_at_1fppi,"
                << curve.recall_at(1.0) << '\n';
        std::cout << "auc " << curve.auc << " recall@1fppi " << curve.recall_at(1.0) << "\n";
        return 0;
    }
    if (f.mode != "seg")
        throw ArgumentError("eval: --mode must be det or seg");

    std::ofstream csv(out_path(g, "seg.csv"));
    csv << "image,error,vacuous\n" << std::setprecision(12);
    double total = 0;
    int counted = 0;
    for (const auto& id : ids) {
        const RasterImage img = load_image(ds.image_path(id));
        const PyramidGeometry geo = geometry(img);
        for (const Annotation* a : ds.objects_of(id)) {
            if (a->object != f.object)
                continue;
            const DetectionRecord* best = nullptr;
            for (const auto& d : dets)
                if (d.image == id && d.object == f.object && (!best || d.score > best->score))
                    best = &d;
            PixelMask pred(img.width, img.height);
            if (best)
                pred = rasterize_cells(best->y, layout.shape(best->y.viewpoint), geo);
            if (f.refined)
                pred = refine_mask(pred, segment_unsupervised(img, g.run.segment_k, g.run.segment_min_size));
            const PixelMask gt = load_mask(ds.root / a->mask);
            const SegError e = voc_seg_error(pred, gt);
            csv << id << ',' << e.error << ',' << (e.vacuous ? 1 : 0) << '\n';
            total += e.error;
            ++counted;
        }
    }
    const double mean = counted ? total / counted : 0.0;
    csv << "mean," << mean << ",0\n";
    std::cout << "mean segmentation error " << mean << " over " << counted << " objects\n";
    return 0;
}

void add_range(CLI::App* app, RangeFlags& r) {
    app->add_option("--begin", r.begin, "first image index (sorted ids)")->check(CLI::NonNegativeNumber);
    app->add_option("--end", r.end, "one past the last image index; -1 = all");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Occlusion-aware detection and segmentation"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--out-dir", g.out_dir, "directory receiving every output file");
    app.add_option("--threads", g.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

    SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "generate a synthetic occlusion dataset");
    synth->add_option("--n", sf.n, "number of images")->check(CLI::NonNegativeNumber);
    synth->add_option("--max-occlusion", sf.max_occlusion, "largest hidden fraction")->check(CLI::Range(0.0, 0.9));
    synth->add_option("--occluders", sf.occluders, "maximum occluders per image")->check(CLI::NonNegativeNumber);
    synth->add_option("--clutter", sf.clutter, "background clutter level")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--objects", sf.objects, "object classes per image")->check(CLI::Range(1, 4));
    synth->add_flag("--overlap", sf.overlap, "let later objects overlap earlier ones");
    synth->add_option("--width", sf.width, "image width")->check(CLI::Range(16, 4096));
    synth->add_option("--height", sf.height, "image height")->check(CLI::Range(16, 4096));
    synth->add_option("--shape-w", sf.shape_w, "object width in cells")->check(CLI::Range(1, 64));
    synth->add_option("--shape-h", sf.shape_h, "object height in cells")->check(CLI::Range(1, 64));
    synth->add_option("--texture-seed", sf.texture_seed, "object appearance seed");

    TrainFlags tf;
    auto* trn = app.add_subcommand("train", "cutting-plane training on a dataset");
    trn->add_option("--data", tf.data, "dataset directory")->required();
    add_range(trn, tf.range);
    trn->add_option("--max-iters", tf.max_iters, "override max_iters from the config");
    trn->add_flag("--no-hop", tf.no_hop, "pin the higher-order weights to zero");

    DetectFlags df;
    auto* det = app.add_subcommand("detect", "run detection on images");
    det->add_option("--model", df.models, "model file (repeat for several objects)")->required();
    det->add_option("--image", df.images, "input image (repeatable)");
    det->add_option("--data", df.data, "dataset directory to read images from");
    add_range(det, df.range);
    det->add_option("--top-n", df.top_n, "detections per image and model")->check(CLI::NonNegativeNumber);
    det->add_flag("--multi", df.multi, "sequential multi-object pass over all models");
    det->add_flag("!--no-overlays", df.overlays, "skip SVG overlays");

    EvalFlags ef;
    auto* ev = app.add_subcommand("eval", "score detections against a dataset");
    ev->add_option("--detections", ef.detections, "detections file")->required();
    ev->add_option("--data", ef.data, "dataset directory")->required();
    add_range(ev, ef.range);
    ev->add_option("--mode", ef.mode, "det or seg")->check(CLI::IsMember({"det", "seg"}));
    ev->add_flag("--refined", ef.refined, "score segment-refined masks");
    ev->add_option("--object", ef.object, "object id to score");
    ev->add_option("--iou-match", ef.iou_match, "box IoU needed for a match")->check(CLI::Range(0.0, 1.0));

    CLI11_PARSE(app, argc, argv);

    try {
        if (!g.config.empty())
            g.run = load_config(g.config);
        set_num_threads(g.threads);
        if (synth->parsed())
            return cmd_synth(g, sf);
        if (trn->parsed())
            return cmd_train(g, tf);
        if (det->parsed())
            return cmd_detect(g, df);
        if (ev->parsed())
            return cmd_eval(g, ef);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
