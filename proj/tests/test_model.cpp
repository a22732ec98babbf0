#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "occseg/model.hpp"

using namespace occseg;

namespace {

ModelLayout two_view_layout() {
    ModelLayout l;
    l.shapes = {{6, 4}, {3, 5}};
    l.clique_size = 4;
    return l;
}

}  // namespace

TEST(Model, BlockLengthIs63CellsPlusKPlus4) {
    const ModelLayout l = two_view_layout();
    EXPECT_EQ(l.block_length(0), 63u * 24 + 4 + 4);
    EXPECT_EQ(l.block_length(1), 63u * 15 + 4 + 4);
    EXPECT_EQ(l.block_offset(1), l.block_length(0));
    EXPECT_EQ(l.total_length(), l.block_length(0) + l.block_length(1));
}

TEST(Model, OffsetsPartitionTheBlock) {
    const ModelLayout l = two_view_layout();
    for (int a = 0; a < 2; ++a) {
        const std::size_t wh = l.shape(a).cells();
        EXPECT_EQ(l.occluded_offset(a), 31 * wh);
        EXPECT_EQ(l.prior_offset(a), 62 * wh);
        EXPECT_EQ(l.trunc_offset(a), 63 * wh);
        EXPECT_EQ(l.pairwise_offset(a), 63 * wh + 1);
        EXPECT_EQ(l.hop_offset(a), 63 * wh + 2);
        EXPECT_EQ(l.bias_offset(a) + 1, l.block_length(a));
    }
}

TEST(Model, ValidateRejectsDegenerateLayouts) {
    ModelLayout l;
    EXPECT_THROW(l.validate(), ArgumentError);
    l.shapes = {{0, 3}};
    EXPECT_THROW(l.validate(), ArgumentError);
    l.shapes = {{2, 3}};
    l.clique_size = 1;
    EXPECT_THROW(l.validate(), ArgumentError);
    EXPECT_THROW(l.shape(1), ArgumentError);
}

TEST(Model, UnpackChecksLength) {
    EXPECT_THROW(WeightVector::unpack(two_view_layout(), std::vector<double>(5)), FormatError);
}

TEST(Model, ViewpointViewsPointIntoTheRightBlock) {
    const ModelLayout l = two_view_layout();
    std::vector<double> flat(l.total_length());
    for (std::size_t i = 0; i < flat.size(); ++i)
        flat[i] = static_cast<double>(i);
    const WeightVector w = WeightVector::unpack(l, flat);
    const auto v1 = w.viewpoint(1);
    const double base = static_cast<double>(l.block_offset(1));
    EXPECT_EQ(v1.visible[0], base);
    EXPECT_EQ(v1.occluded[0], base + 31 * 15);
    EXPECT_EQ(v1.prior.size(), 15u);
    EXPECT_EQ(v1.trunc, base + 63 * 15);
    EXPECT_EQ(v1.pairwise, base + 63 * 15 + 1);
    EXPECT_EQ(v1.hop.size(), 5u);
    EXPECT_EQ(v1.bias, base + l.block_length(1) - 1);
}

TEST(Model, RleRoundTrip) {
    const BitVector v = {1, 1, 1, 0, 0, 1, 0, 0, 0, 0};
    EXPECT_EQ(encode_rle(v), "1x3,0x2,1x1,0x4");
    EXPECT_EQ(decode_rle("1x3,0x2,1x1,0x4"), v);
    EXPECT_EQ(encode_rle({}), "-");
    EXPECT_TRUE(decode_rle("-").empty());
    std::mt19937_64 rng(9);
    for (int t = 0; t < 100; ++t) {
        BitVector r(static_cast<std::size_t>(1 + rng() % 40));
        for (auto& b : r)
            b = static_cast<std::uint8_t>(rng() & 1u);
        EXPECT_EQ(decode_rle(encode_rle(r)), r);
    }
}

TEST(Model, RleRejectsMalformedText) {
    for (const char* bad : {"", "2x3", "1x", "1x0", "1y3", "1x3,", "1x3;0x1", "1x-2", "1x3a"})
        EXPECT_THROW(decode_rle(bad), FormatError) << bad;
}

TEST(Model, SerialisationRoundTripIsByteIdentical) {
    const ModelLayout l = two_view_layout();
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> flat(l.total_length());
    for (auto& x : flat)
        x = n(rng);
    const WeightVector w = WeightVector::unpack(l, flat);
    const auto path = std::filesystem::temp_directory_path() / "occseg_test_model.bin";
    save_model(w, path);
    const WeightVector back = load_model(path);
    EXPECT_EQ(back.layout(), l);
    EXPECT_EQ(back.pack(), flat);
    EXPECT_EQ(serialize_model(back), serialize_model(w));
    // Header: magic, version, A, K, cell size, shapes, count.
    const auto bytes = serialize_model(w);
    EXPECT_EQ(bytes.size(), 8 + 4 * 4 + 2 * 8 + 8 + 8 * flat.size());
}

TEST(Model, DeserialiseRejectsCorruptFiles) {
    ModelLayout l;
    l.shapes = {{2, 2}};
    const auto good = serialize_model(WeightVector(l));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_model(bad_magic), FormatError);
    auto truncated = good;
    truncated.resize(good.size() - 3);
    EXPECT_THROW(deserialize_model(truncated), FormatError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_model(trailing), FormatError);
    auto bad_version = good;
    bad_version[8] = 7;
    EXPECT_THROW(deserialize_model(bad_version), FormatError);
    EXPECT_THROW(load_model("/nonexistent/dir/model.bin"), IoError);
}
