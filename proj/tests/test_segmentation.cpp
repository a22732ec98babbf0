#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "occseg/pyramid.hpp"
#include "occseg/segmentation.hpp"

using namespace occseg;

namespace {

RasterImage two_halves(int w, int h) {
    RasterImage img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = x < w / 2 ? 0.1 : 0.9;
    return img;
}

}  // namespace

TEST(Segmentation, TwoFlatHalvesGiveTwoSegments) {
    const SegmentMap seg = segment_unsupervised(two_halves(40, 20), 0.5, 5);
    ASSERT_EQ(seg.num_segments(), 2);
    EXPECT_EQ(seg.at(0, 0), 0);
    EXPECT_EQ(seg.at(39, 19), 1);
    EXPECT_EQ(seg.segment_areas[0], 400);
    EXPECT_EQ(seg.segment_areas[1], 400);
}

TEST(Segmentation, IdsAreDenseInFirstAppearanceOrderAndAreasAddUp) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    RasterImage img(30, 25, 3);
    for (auto& v : img.data)
        v = u(rng);
    const SegmentMap seg = segment_unsupervised(img, 1.0, 10);
    int next = 0;
    std::vector<long> areas(static_cast<std::size_t>(seg.num_segments()), 0);
    for (int id : seg.pixel_labels) {
        ASSERT_GE(id, 0);
        ASSERT_LE(id, next);
        if (id == next)
            ++next;
        ++areas[static_cast<std::size_t>(id)];
    }
    EXPECT_EQ(next, seg.num_segments());
    EXPECT_EQ(areas, seg.segment_areas);
    for (long a : seg.segment_areas)
        EXPECT_GE(a, 10);
}

TEST(Segmentation, RejectsBadParameters) {
    const RasterImage img = two_halves(8, 8);
    EXPECT_THROW(segment_unsupervised(img, 0.0, 5), ArgumentError);
    EXPECT_THROW(segment_unsupervised(img, 1.0, 0), ArgumentError);
}

TEST(Segmentation, ProjectionTakesMajorityIdPerCell) {
    std::mt19937_64 rng(5);
    SegmentMap seg;
    seg.width = 37;
    seg.height = 29;
    seg.pixel_labels.resize(37 * 29);
    // Blocky random labels so that majorities are not all ties.
    for (int y = 0; y < 29; ++y)
        for (int x = 0; x < 37; ++x)
            seg.pixel_labels[y * 37 + x] = static_cast<int>((x / 5 * 7 + y / 3 * 3) % 4);
    seg.segment_areas.assign(4, 0);
    for (int id : seg.pixel_labels)
        ++seg.segment_areas[id];

    PyramidGeometry geo;
    geo.cell_size = 4;
    geo.base_width = 37;
    geo.base_height = 29;
    geo.scales = {1.0, 0.75};
    const std::vector<std::pair<int, int>> dims = {{9, 7}, {6, 5}};
    const SegmentCells cells = project_segments(seg, geo, dims);
    for (int level = 0; level < 2; ++level) {
        const double s = geo.scales[level];
        for (int cy = 0; cy < dims[level].second; ++cy)
            for (int cx = 0; cx < dims[level].first; ++cx) {
                // Pixels whose centres fall inside the cell, clipped to the image.
                std::map<int, int> votes;
                for (int y = 0; y < 29; ++y)
                    for (int x = 0; x < 37; ++x) {
                        const double px = (x + 0.5) * s / geo.cell_size, py = (y + 0.5) * s / geo.cell_size;
                        if (px >= cx && px < cx + 1 && py >= cy && py < cy + 1)
                            ++votes[seg.at(x, y)];
                    }
                ASSERT_FALSE(votes.empty());
                int best = -1, best_n = -1;
                for (const auto& [id, n] : votes)
                    if (n > best_n) {
                        best = id;
                        best_n = n;
                    }
                EXPECT_EQ(cells[level].at(cx, cy), best) << "level " << level << " cell " << cx << "," << cy;
            }
    }
}

TEST(Segmentation, ProjectionRejectsMismatchedImage) {
    SegmentMap seg;
    seg.width = 10;
    seg.height = 10;
    seg.pixel_labels.assign(100, 0);
    seg.segment_areas = {100};
    PyramidGeometry geo;
    geo.base_width = 12;
    geo.base_height = 10;
    geo.scales = {1.0};
    EXPECT_THROW(project_segments(seg, geo, {{1, 1}}), ArgumentError);
}
