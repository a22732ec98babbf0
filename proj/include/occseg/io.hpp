#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "boxes.hpp"
#include "detect.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "image.hpp"
#include "model.hpp"
#include "pyramid.hpp"
#include "segmentation.hpp"
#include "synth.hpp"

namespace occseg {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration: one `key = value` per line, `#` starts a comment.
// ---------------------------------------------------------------------------
struct RunConfig {
    double c_reg = 25.0;
    int k = kDefaultCliqueSize;
    double epsilon = 1e-3;
    int max_iters = 200;
    double scale_step = kDefaultScaleStep;
    int n_levels = kDefaultLevels;
    int cell_size = kDefaultCellSize;
    double nms_iou = kDefaultNmsIou;
    double segment_k = kDefaultSegmentK;
    int segment_min_size = kDefaultSegmentMinSize;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double parse_number(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ParseError(where + ": '" + text + "' is not a number");
    }
    if (used != text.size() || !std::isfinite(v))
        throw ParseError(where + ": '" + text + "' is not a number");
    return v;
}

inline int parse_int(const std::string& text, const std::string& where) {
    const double v = parse_number(text, where);
    if (v != std::floor(v) || std::abs(v) > 1e9)
        throw ParseError(where + ": '" + text + "' is not an integer");
    return static_cast<int>(v);
}

inline void require(bool ok, const std::string& where, const std::string& what) {
    if (!ok)
        throw ParseError(where + ": " + what);
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& name) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = name + ":" + std::to_string(lineno);
        line = detail::trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        detail::require(eq != std::string::npos, where, "expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key == "c_reg") {
            cfg.c_reg = detail::parse_number(val, where);
            detail::require(cfg.c_reg > 0, where, "c_reg must be > 0");
        } else if (key == "k") {
            cfg.k = detail::parse_int(val, where);
            detail::require(cfg.k >= 2 && cfg.k <= 32, where, "k must lie in [2, 32]");
        } else if (key == "epsilon") {
            cfg.epsilon = detail::parse_number(val, where);
            detail::require(cfg.epsilon > 0 && cfg.epsilon < 1, where, "epsilon must lie in (0, 1)");
        } else if (key == "max_iters") {
            cfg.max_iters = detail::parse_int(val, where);
            detail::require(cfg.max_iters >= 0, where, "max_iters must be >= 0");
        } else if (key == "scale_step") {
            cfg.scale_step = detail::parse_number(val, where);
            detail::require(cfg.scale_step > 0 && cfg.scale_step < 1, where, "scale_step must lie in (0, 1)");
        } else if (key == "n_levels") {
            cfg.n_levels = detail::parse_int(val, where);
            detail::require(cfg.n_levels >= 1 && cfg.n_levels <= 64, where, "n_levels must lie in [1, 64]");
        } else if (key == "cell_size") {
            cfg.cell_size = detail::parse_int(val, where);
            detail::require(cfg.cell_size >= 2 && cfg.cell_size <= 64, where, "cell_size must lie in [2, 64]");
        } else if (key == "nms_iou") {
            cfg.nms_iou = detail::parse_number(val, where);
            detail::require(cfg.nms_iou > 0 && cfg.nms_iou <= 1, where, "nms_iou must lie in (0, 1]");
        } else if (key == "segment_k") {
            cfg.segment_k = detail::parse_number(val, where);
            detail::require(cfg.segment_k >= 0, where, "segment_k must be >= 0");
        } else if (key == "segment_min_size") {
            cfg.segment_min_size = detail::parse_int(val, where);
            detail::require(cfg.segment_min_size >= 1, where, "segment_min_size must be >= 1");
        } else {
            throw ParseError(where + ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config " + path.string());
    return parse_config(in, path.string());
}

// ---------------------------------------------------------------------------
// Dataset on disk:
//   images/NNN.png
//   masks/NNN.png, masks/NNN_o.png for object o > 0   (binary)
//   annotations.jsonl, one object instance per line:
//     {"image":"000","object":0,"viewpoint":0,"level":2,"x":3,"y":1,
//      "w":6,"h":4,"box":[x0,y0,x1,y1],"v":"1x20,0x4","mask":"masks/000.png"}
// ---------------------------------------------------------------------------
struct Annotation {
    std::string image;
    int object = 0;
    Label y;
    ViewpointShape shape;
    PixelRect box;
    std::string mask;  // path relative to the dataset root
};

struct Dataset {
    fs::path root;
    std::vector<std::string> image_ids;  // sorted
    std::vector<Annotation> annotations;

    fs::path image_path(const std::string& id) const { return root / "images" / (id + ".png"); }

    bool has_image(const std::string& id) const {
        return std::binary_search(image_ids.begin(), image_ids.end(), id);
    }

    std::vector<const Annotation*> objects_of(const std::string& id) const {
        std::vector<const Annotation*> out;
        for (const auto& a : annotations)
            if (a.image == id)
                out.push_back(&a);
        return out;
    }
};

inline std::string image_id(int index) {
    std::ostringstream s;
    s << std::setw(3) << std::setfill('0') << index;
    return s.str();
}

inline nlohmann::json annotation_to_json(const Annotation& a) {
    return {{"image", a.image},
            {"object", a.object},
            {"viewpoint", a.y.viewpoint},
            {"level", a.y.p.level},
            {"x", a.y.p.x},
            {"y", a.y.p.y},
            {"w", a.shape.w},
            {"h", a.shape.h},
            {"box", {a.box.x.begin, a.box.y.begin, a.box.x.end, a.box.y.end}},
            {"v", encode_rle(a.y.v)},
            {"mask", a.mask}};
}

inline Annotation annotation_from_json(const std::string& line, const std::string& where) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    Annotation a;
    try {
        a.image = j.at("image").get<std::string>();
        a.object = j.at("object").get<int>();
        a.y.viewpoint = j.at("viewpoint").get<int>();
        a.y.p.level = j.at("level").get<int>();
        a.y.p.x = j.at("x").get<int>();
        a.y.p.y = j.at("y").get<int>();
        a.shape.w = j.at("w").get<int>();
        a.shape.h = j.at("h").get<int>();
        const auto box = j.at("box").get<std::vector<long>>();
        if (box.size() != 4)
            throw ParseError(where + ": box needs four coordinates");
        a.box = {{box[0], box[2]}, {box[1], box[3]}};
        a.mask = j.value("mask", std::string());
        a.y.v = decode_rle(j.at("v").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    } catch (const FormatError& e) {
        throw ParseError(where + ": " + e.what());
    }
    if (a.object < 0 || a.y.viewpoint < 0 || a.y.p.level < 0 || a.shape.w < 1 || a.shape.h < 1)
        throw ParseError(where + ": negative index or empty shape");
    if (static_cast<int>(a.y.v.size()) != a.shape.cells())
        throw ParseError(where + ": visibility length does not match w * h");
    return a;
}

inline Dataset load_dataset(const fs::path& root) {
    const fs::path ann = root / "annotations.jsonl";
    std::ifstream in(ann);
    if (!in)
        throw ParseError(ann.string() + ": cannot open annotations");
    Dataset ds;
    ds.root = root;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        ds.annotations.push_back(annotation_from_json(line, ann.string() + ":" + std::to_string(lineno)));
    }
    if (fs::exists(root / "images"))
        for (const auto& e : fs::directory_iterator(root / "images"))
            if (e.path().extension() == ".png")
                ds.image_ids.push_back(e.path().stem().string());
    std::sort(ds.image_ids.begin(), ds.image_ids.end());
    for (const auto& a : ds.annotations)
        if (!ds.has_image(a.image))
            throw ReferenceError(ann.string() + ": annotation refers to missing image '" + a.image + "'");
    return ds;
}

inline PixelMask mask_from_image(const RasterImage& img) {
    PixelMask m(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            m.at(x, y) = img.at(x, y, 0) > 0.5 ? 1 : 0;
    return m;
}

inline RasterImage mask_to_image(const PixelMask& m) {
    RasterImage img;
    img.width = m.width;
    img.height = m.height;
    img.channels = 1;
    img.data.resize(m.bits.size());
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        img.data[i] = m.bits[i] ? 1.0 : 0.0;
    return img;
}

inline PixelMask load_mask(const fs::path& path) { return mask_from_image(load_image(path)); }

inline void write_dataset(const fs::path& root, const std::vector<SynthImage>& images, const SynthConfig& cfg) {
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    std::ofstream ann(root / "annotations.jsonl", std::ios::trunc);
    if (!ann)
        throw IoError("cannot write " + (root / "annotations.jsonl").string());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string id = image_id(static_cast<int>(i));
        save_png(images[i].image, root / "images" / (id + ".png"));
        for (const auto& obj : images[i].objects) {
            const std::string mask_name =
                "masks/" + id + (obj.object_id == 0 ? "" : "_" + std::to_string(obj.object_id)) + ".png";
            save_png(mask_to_image(obj.mask), root / mask_name);
            Annotation a{id, obj.object_id, obj.y, cfg.shape, obj.box, mask_name};
            ann << annotation_to_json(a).dump() << '\n';
        }
    }
    if (!ann)
        throw IoError("write failed: " + (root / "annotations.jsonl").string());
}

// ---------------------------------------------------------------------------
// Detections, one per line:
//   <image> <object> <viewpoint> <level> <x> <y> <score> <rle v>
// ---------------------------------------------------------------------------
struct DetectionRecord {
    std::string image;
    int object = 0;
    Label y;
    double score = 0;
};

inline std::string format_detection(const DetectionRecord& d) {
    std::ostringstream s;
    s << d.image << ' ' << d.object << ' ' << d.y.viewpoint << ' ' << d.y.p.level << ' ' << d.y.p.x << ' '
      << d.y.p.y << ' ' << std::setprecision(17) << d.score << ' ' << encode_rle(d.y.v);
    return s.str();
}

inline DetectionRecord parse_detection(const std::string& line, const std::string& where) {
    std::istringstream s(line);
    DetectionRecord d;
    std::string score, rle, extra;
    if (!(s >> d.image >> d.object >> d.y.viewpoint >> d.y.p.level >> d.y.p.x >> d.y.p.y >> score >> rle) ||
        (s >> extra))
        throw ParseError(where + ": expected 8 fields: image object viewpoint level x y score v");
    d.score = detail::parse_number(score, where);
    try {
        d.y.v = decode_rle(rle);
    } catch (const FormatError& e) {
        throw ParseError(where + ": " + e.what());
    }
    return d;
}

inline std::vector<DetectionRecord> load_detections(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read detections " + path.string());
    std::vector<DetectionRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        out.push_back(parse_detection(line, path.string() + ":" + std::to_string(lineno)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG overlay: source image, per detection a box outline and a translucent
// tint over its visible cells.
// ---------------------------------------------------------------------------
struct OverlayItem {
    PixelRect box;
    std::vector<PixelRect> visible_cells;
    double score = 0;
    int object = 0;
};

inline std::string overlay_svg(const fs::path& image_href, int width, int height,
                               const std::vector<OverlayItem>& items) {
    static const char* colors[] = {"#00c000", "#0080ff", "#ff8000", "#d000d0"};
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
    s << "  <image xlink:href=\"" << image_href.string() << "\" x=\"0\" y=\"0\" width=\"" << width
      << "\" height=\"" << height << "\"/>\n";
    for (const auto& it : items) {
        const char* c = colors[static_cast<std::size_t>(it.object) % 4];
        for (const auto& r : it.visible_cells)
            s << "  <rect x=\"" << r.x.begin << "\" y=\"" << r.y.begin << "\" width=\"" << r.x.size()
              << "\" height=\"" << r.y.size() << "\" fill=\"" << c << "\" fill-opacity=\"0.35\"/>\n";
        s << "  <rect x=\"" << it.box.x.begin << "\" y=\"" << it.box.y.begin << "\" width=\"" << it.box.x.size()
          << "\" height=\"" << it.box.y.size() << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
        s << "  <text x=\"" << it.box.x.begin + 2 << "\" y=\"" << it.box.y.begin + 12 << "\" fill=\"" << c
          << "\" font-size=\"10\">" << std::fixed << std::setprecision(3) << it.score << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

inline OverlayItem overlay_item(const Label& y, const ViewpointShape& shape, const PyramidGeometry& geo,
                                double score, int object) {
    OverlayItem it;
    it.box = box_pixels(geo, y.p, shape);
    it.score = score;
    it.object = object;
    for (int cy = 0; cy < shape.h; ++cy)
        for (int cx = 0; cx < shape.w; ++cx)
            if (y.v[static_cast<std::size_t>(cy * shape.w + cx)])
                it.visible_cells.push_back(cell_pixels(geo, y.p, cx, cy));
    return it;
}

// Cell ownership after a multi-object pass, one block per level:
//   level <l> <grid_w> <grid_h>
//   followed by grid_h rows of owner ids (0 = unowned)
inline std::string format_ownership(const ResponseTransferState& st, const FeaturePyramid& pyr) {
    std::ostringstream s;
    for (int l = 0; l < pyr.num_levels(); ++l) {
        const int gw = pyr.levels[l].grid_w(), gh = pyr.levels[l].grid_h();
        s << "level " << l << ' ' << gw << ' ' << gh << '\n';
        for (int y = 0; y < gh; ++y) {
            for (int x = 0; x < gw; ++x)
                s << (x ? " " : "") << st.owner[l][static_cast<std::size_t>(y) * gw + x];
            s << '\n';
        }
    }
    return s.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
    if (!out)
        throw IoError("write failed: " + path.string());
}

}  // namespace occseg
