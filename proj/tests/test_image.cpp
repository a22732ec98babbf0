#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "occseg/image.hpp"

namespace fs = std::filesystem;
using namespace occseg;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "occseg_test_image";
    fs::create_directories(dir);
    return dir / name;
}

RasterImage gradient_image(int w, int h, int channels) {
    RasterImage img(w, h, channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(x, y, c) = ((x * 7 + y * 13 + c * 50) % 256) / 255.0;
    return img;
}

}  // namespace

TEST(Image, PngRoundTripIsExactForEightBitValues) {
    const RasterImage img = gradient_image(37, 21, 3);
    const fs::path p = temp_file("rt.png");
    save_png(img, p);
    const RasterImage back = load_image(p);
    ASSERT_EQ(back.width, 37);
    ASSERT_EQ(back.height, 21);
    ASSERT_EQ(back.channels, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        EXPECT_DOUBLE_EQ(back.data[i], img.data[i]);
}

TEST(Image, RgbPngOf640x480HoldsAllSamples) {
    const fs::path p = temp_file("big.png");
    save_png(gradient_image(640, 480, 3), p);
    const RasterImage img = load_image(p);
    EXPECT_EQ(img.channels, 3);
    EXPECT_EQ(img.data.size(), 921600u);
}

TEST(Image, AsciiGraymapIsScaledByMaxval) {
    const std::string pgm = "P2\n# comment\n3 2\n10\n0 5 10\n10 5 0\n";
    const RasterImage img = decode_image({pgm.begin(), pgm.end()});
    ASSERT_EQ(img.width, 3);
    ASSERT_EQ(img.height, 2);
    EXPECT_DOUBLE_EQ(img.at(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(img.at(0, 1), 1.0);
}

TEST(Image, SixteenBitBinaryGraymapIsBigEndian) {
    std::string pgm = "P5 2 1 65535\n";
    pgm += std::string("\x80\x00\xff\xff", 4);
    const RasterImage img = decode_image({pgm.begin(), pgm.end()});
    EXPECT_NEAR(img.at(0, 0), 32768.0 / 65535.0, 1e-12);
    EXPECT_DOUBLE_EQ(img.at(1, 0), 1.0);
}

TEST(Image, MissingFileIsIoError) {
    EXPECT_THROW(load_image(temp_file("does_not_exist.png")), IoError);
}

TEST(Image, GarbageBytesAreFormatError) {
    const std::vector<unsigned char> junk = {'h', 'e', 'l', 'l', 'o'};
    EXPECT_THROW(decode_image(junk), FormatError);
    std::vector<unsigned char> truncated_png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a, 0, 0};
    EXPECT_THROW(decode_image(truncated_png), FormatError);
}

TEST(Image, BilinearResizeKeepsConstantImagesConstant) {
    RasterImage img = gradient_image(20, 10, 1);
    std::fill(img.data.begin(), img.data.end(), 0.3);
    const RasterImage small = resize_bilinear(img, 13, 7);
    ASSERT_EQ(small.width, 13);
    ASSERT_EQ(small.height, 7);
    for (double v : small.data)
        EXPECT_NEAR(v, 0.3, 1e-12);
}
