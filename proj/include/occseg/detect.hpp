#pragma once

#include <algorithm>
#include <numeric>
#include <tuple>
#include <vector>

#include "boxes.hpp"
#include "energy.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace occseg {

inline constexpr double kDefaultNmsIou = 0.5;

struct Detection {
    Label y;
    double energy = 0;
    double score = 0;  // -energy
};

struct SearchLocation {
    BoxPosition p;
    int viewpoint = 0;
};

// Every integer cell offset on every level for each viewpoint, allowing the
// box to overhang each image side by at most half its size. Ordered by
// (level, y, x, viewpoint), which is also the tie-break order.
inline std::vector<SearchLocation> search_locations(const FeaturePyramid& pyr, const ModelLayout& layout,
                                                    int first_viewpoint = 0, int last_viewpoint = -1) {
    if (last_viewpoint < 0)
        last_viewpoint = layout.num_viewpoints();
    std::vector<SearchLocation> out;
    auto lo = [](int extent) { return -(extent / 2); };
    auto hi = [](int grid, int extent) { return grid - extent + extent / 2; };
    for (int level = 0; level < pyr.num_levels(); ++level) {
        const int gw = pyr.levels[level].grid_w(), gh = pyr.levels[level].grid_h();
        int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
        for (int a = first_viewpoint; a < last_viewpoint; ++a) {
            const auto& s = layout.shape(a);
            y0 = std::min(y0, lo(s.h));
            y1 = std::max(y1, hi(gh, s.h));
            x0 = std::min(x0, lo(s.w));
            x1 = std::max(x1, hi(gw, s.w));
        }
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                for (int a = first_viewpoint; a < last_viewpoint; ++a) {
                    const auto& s = layout.shape(a);
                    if (y < lo(s.h) || y > hi(gh, s.h) || x < lo(s.w) || x > hi(gw, s.w))
                        continue;
                    out.push_back({{x, y, level}, a});
                }
            }
        }
    }
    return out;
}

namespace detail {

// Energy-minimising labelling at every location. `adjust(maps, loc)` may
// rewrite the unary maps before the cut.
template <typename Adjust>
std::vector<Detection> scan_locations(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                                      const WeightVector& w, const std::vector<SearchLocation>& locs,
                                      Adjust&& adjust) {
    std::vector<Detection> out(locs.size());
    parallel_for(locs.size(), [&](std::size_t k) {
        const auto& loc = locs[k];
        const BoxCells box = gather_box(pyr, seg_cells, loc.p, w.layout().shape(loc.viewpoint));
        EnergyMaps maps = build_energy_maps(box, w.viewpoint(loc.viewpoint));
        adjust(maps, loc);
        Labelling lab = min_energy_labelling(maps);
        out[k].y = {loc.p, std::move(lab.v), loc.viewpoint};
        out[k].energy = lab.energy;
        out[k].score = -lab.energy;
    });
    return out;
}

// Location indices sorted by energy, ties by enumeration order.
inline std::vector<std::size_t> rank_by_energy(const std::vector<Detection>& dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].energy < dets[b].energy; });
    return order;
}

inline void check_compatible(const FeaturePyramid& pyr, const SegmentCells& seg_cells, const WeightVector& w) {
    if (pyr.levels.empty())
        throw ArgumentError("empty pyramid");
    if (w.layout().cell_size != pyr.cell_size())
        throw ArgumentError("model cell size " + std::to_string(w.layout().cell_size) +
                            " differs from pyramid cell size " + std::to_string(pyr.cell_size()));
    if (seg_cells.size() != pyr.levels.size())
        throw ArgumentError("segment cells do not cover the pyramid");
}

}  // namespace detail

inline double detection_iou(const Detection& a, const Detection& b, const ModelLayout& layout,
                            const PyramidGeometry& geo) {
    return rect_iou(box_pixels(geo, a.y.p, layout.shape(a.y.viewpoint)),
                    box_pixels(geo, b.y.p, layout.shape(b.y.viewpoint)));
}

// Greedy suppression: repeatedly keep the best-scoring detection and drop the
// rest whose base-pixel box IoU with it exceeds the threshold. Equal scores
// keep their input order. Stops after max_keep survivors.
inline std::vector<Detection> nms(std::vector<Detection> dets, const ModelLayout& layout,
                                  const PyramidGeometry& geo, double iou_threshold = kDefaultNmsIou,
                                  std::size_t max_keep = static_cast<std::size_t>(-1)) {
    if (!(iou_threshold > 0 && iou_threshold < 1))
        throw ArgumentError("nms: iou_threshold must lie in (0, 1)");
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    std::vector<PixelRect> kept_rects;
    for (auto& d : dets) {
        if (kept.size() >= max_keep)
            break;
        const PixelRect r = box_pixels(geo, d.y.p, layout.shape(d.y.viewpoint));
        bool suppressed = false;
        for (const auto& k : kept_rects) {
            if (rect_iou(r, k) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept_rects.push_back(r);
            kept.push_back(std::move(d));
        }
    }
    return kept;
}

// Best top_n detections over all viewpoints, levels and offsets after NMS.
inline std::vector<Detection> detect(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                                     const WeightVector& w, std::size_t top_n,
                                     double nms_iou = kDefaultNmsIou) {
    detail::check_compatible(pyr, seg_cells, w);
    if (top_n == 0)
        return {};
    const auto locs = search_locations(pyr, w.layout());
    auto all = detail::scan_locations(pyr, seg_cells, w, locs, [](EnergyMaps&, const SearchLocation&) {});
    std::vector<Detection> ranked;
    ranked.reserve(all.size());
    for (std::size_t k : detail::rank_by_energy(all))
        ranked.push_back(std::move(all[k]));
    return nms(std::move(ranked), w.layout(), pyr.geometry, nms_iou, top_n);
}

// Ground-truth visibility rasterised at base resolution over the ground-truth
// box, with an integral image for rectangle counts.
class ProjectedMask {
public:
    ProjectedMask(const Label& y, const ViewpointShape& shape, const PyramidGeometry& geo)
        : rect_(box_pixels(geo, y.p, shape)) {
        const long w = rect_.x.size(), h = rect_.y.size();
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(w * h), 0);
        for (int cy = 0; cy < shape.h; ++cy) {
            for (int cx = 0; cx < shape.w; ++cx) {
                if (!y.v[static_cast<std::size_t>(cy * shape.w + cx)])
                    continue;
                const PixelRect c = cell_pixels(geo, y.p, cx, cy);
                for (long py = c.y.begin; py < c.y.end; ++py)
                    for (long px = c.x.begin; px < c.x.end; ++px)
                        bits[static_cast<std::size_t>((py - rect_.y.begin) * w + (px - rect_.x.begin))] = 1;
            }
        }
        integral_.assign(static_cast<std::size_t>((w + 1) * (h + 1)), 0);
        for (long py = 0; py < h; ++py)
            for (long px = 0; px < w; ++px)
                integral_[idx(px + 1, py + 1)] = bits[static_cast<std::size_t>(py * w + px)] +
                                                 integral_[idx(px, py + 1)] + integral_[idx(px + 1, py)] -
                                                 integral_[idx(px, py)];
        total_ = integral_.back();
    }

    const PixelRect& rect() const { return rect_; }
    long total() const { return total_; }

    // Number of visible ground-truth pixels inside r.
    long count(const PixelRect& r) const {
        const PixelRect c = intersect(r, rect_);
        if (c.x.size() == 0 || c.y.size() == 0)
            return 0;
        const long x0 = c.x.begin - rect_.x.begin, x1 = c.x.end - rect_.x.begin;
        const long y0 = c.y.begin - rect_.y.begin, y1 = c.y.end - rect_.y.begin;
        return integral_[idx(x1, y1)] - integral_[idx(x0, y1)] - integral_[idx(x1, y0)] + integral_[idx(x0, y0)];
    }

private:
    std::size_t idx(long x, long y) const { return static_cast<std::size_t>(y * (rect_.x.size() + 1) + x); }

    PixelRect rect_;
    std::vector<long> integral_;
    long total_ = 0;
};

// Folds -loss(y_gt, .) into the maps of one candidate box: the overlap term
// goes into the constant, the per-pixel disagreement term into F_i (pixels the
// ground truth calls 0) and B_i (pixels it calls 1).
inline void subtract_loss(EnergyMaps& maps, const SearchLocation& loc, const ModelLayout& layout,
                          const PyramidGeometry& geo, const ProjectedMask& gt) {
    const auto& shape = layout.shape(loc.viewpoint);
    const PixelRect cand = box_pixels(geo, loc.p, shape);
    const long inter = intersect(cand, gt.rect()).area();
    if (inter == 0) {
        maps.constant -= 1.0;
        return;
    }
    const double uni = static_cast<double>(cand.area() + gt.rect().area() - inter);
    const double iou = inter / uni;
    long inside = 0;
    for (int cy = 0; cy < shape.h; ++cy) {
        for (int cx = 0; cx < shape.w; ++cx) {
            const PixelRect c = cell_pixels(geo, loc.p, cx, cy);
            const long ones = gt.count(c);
            const long zeros = c.area() - ones;
            inside += ones;
            const int i = cy * shape.w + cx;
            maps.visible[i] -= iou * zeros / uni;
            maps.occluded[i] -= iou * ones / uni;
        }
    }
    const long outside = gt.total() - inside;
    maps.constant -= (1.0 - iou) + iou * outside / uni;
}

// argmin over all (viewpoint, position, visibility) of energy - loss(y_gt, .).
// The returned energy is the loss-augmented value.
inline Detection loss_augmented_detect(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                                       const WeightVector& w, const Label& y_gt) {
    detail::check_compatible(pyr, seg_cells, w);
    check_label(y_gt, w.layout());
    const ProjectedMask gt(y_gt, w.layout().shape(y_gt.viewpoint), pyr.geometry);
    const auto locs = search_locations(pyr, w.layout());
    auto all = detail::scan_locations(pyr, seg_cells, w, locs, [&](EnergyMaps& maps, const SearchLocation& loc) {
        subtract_loss(maps, loc, w.layout(), pyr.geometry, gt);
    });
    const auto order = detail::rank_by_energy(all);
    return std::move(all[order.front()]);
}

// Cell ownership after a sequential multi-object pass. Per pyramid level:
// owner = object id (1-based, 0 = none) of the last detection that marked the
// cell visible; response = that object's visible-filter response there.
struct ResponseTransferState {
    std::vector<std::vector<int>> owner;
    std::vector<std::vector<double>> response;
};

struct MultiDetection {
    std::vector<Detection> objects;  // one per model, in processing order
    ResponseTransferState state;
};

// Sequential response transfer between jointly trained detectors. Before an
// object's search its occlusion response B is replaced by the stored response
// on every cell already owned; after its detection, cells it marks visible
// (at any level, matched through base pixels) take it as owner.
inline MultiDetection detect_multi(const FeaturePyramid& pyr, const SegmentCells& seg_cells,
                                   const std::vector<WeightVector>& models, double nms_iou = kDefaultNmsIou) {
    if (models.empty())
        throw ArgumentError("detect_multi: no models");
    for (const auto& m : models) {
        if (m.layout().cell_size != models.front().layout().cell_size)
            throw ArgumentError("detect_multi: models use different cell sizes");
        detail::check_compatible(pyr, seg_cells, m);
    }

    MultiDetection result;
    auto& st = result.state;
    for (const auto& level : pyr.levels) {
        st.owner.emplace_back(static_cast<std::size_t>(level.grid_w()) * level.grid_h(), 0);
        st.response.emplace_back(static_cast<std::size_t>(level.grid_w()) * level.grid_h(), 0.0);
    }

    for (std::size_t o = 0; o < models.size(); ++o) {
        const WeightVector& w = models[o];
        const auto locs = search_locations(pyr, w.layout());
        auto transfer = [&](EnergyMaps& maps, const SearchLocation& loc) {
            const int gw = pyr.levels[loc.p.level].grid_w(), gh = pyr.levels[loc.p.level].grid_h();
            const auto& owner = st.owner[loc.p.level];
            const auto& resp = st.response[loc.p.level];
            for (int cy = 0; cy < maps.h; ++cy) {
                for (int cx = 0; cx < maps.w; ++cx) {
                    const int gx = loc.p.x + cx, gy = loc.p.y + cy;
                    if (gx < 0 || gy < 0 || gx >= gw || gy >= gh)
                        continue;
                    const std::size_t g = static_cast<std::size_t>(gy) * gw + gx;
                    if (owner[g] != 0)
                        maps.occluded[cy * maps.w + cx] = resp[g];
                }
            }
        };
        auto all = detail::scan_locations(pyr, seg_cells, w, locs, transfer);
        std::vector<Detection> ranked;
        for (std::size_t k : detail::rank_by_energy(all))
            ranked.push_back(std::move(all[k]));
        auto top = nms(std::move(ranked), w.layout(), pyr.geometry, nms_iou, 1);
        Detection best = std::move(top.front());

        // Visible-filter responses of the winning placement, before transfer.
        const auto& shape = w.layout().shape(best.y.viewpoint);
        const BoxCells box = gather_box(pyr, seg_cells, best.y.p, shape);
        const EnergyMaps maps = build_energy_maps(box, w.viewpoint(best.y.viewpoint));
        const PixelRect det_rect = box_pixels(pyr.geometry, best.y.p, shape);
        const int det_level = best.y.p.level;
        for (int level = 0; level < pyr.num_levels(); ++level) {
            const int gw = pyr.levels[level].grid_w(), gh = pyr.levels[level].grid_h();
            for (int gy = 0; gy < gh; ++gy) {
                const PixelSpan ys = pyr.geometry.cell_span(gy, 1, level);
                const long py = (ys.begin + ys.end - 1) / 2;
                for (int gx = 0; gx < gw; ++gx) {
                    const PixelSpan xs = pyr.geometry.cell_span(gx, 1, level);
                    const long px = (xs.begin + xs.end - 1) / 2;
                    if (!det_rect.contains(px, py))
                        continue;
                    const long cx = detail::cell_of_pixel(pyr.geometry, px, det_level) - best.y.p.x;
                    const long cy = detail::cell_of_pixel(pyr.geometry, py, det_level) - best.y.p.y;
                    const std::size_t i = static_cast<std::size_t>(cy * shape.w + cx);
                    if (!best.y.v[i])
                        continue;
                    const std::size_t g = static_cast<std::size_t>(gy) * gw + gx;
                    st.owner[level][g] = static_cast<int>(o) + 1;
                    st.response[level][g] = maps.visible[i];
                }
            }
        }
        result.objects.push_back(std::move(best));
    }
    return result;
}

}  // namespace occseg
