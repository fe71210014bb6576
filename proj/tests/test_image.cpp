#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <png.h>

#include "fuselens/errors.hpp"
#include "fuselens/image.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fuselens;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::path(FUSELENS_TEST_TMP) / "image";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST(GrayImage, RejectsOutOfRangeAndBadLength) {
  EXPECT_THROW(GrayImage(2, 2, std::vector<double>{0.0, 1.0, 1.5, 0.0}), InputError);
  EXPECT_THROW(GrayImage(2, 2, std::vector<double>{0.0, 1.0, 0.5}), InputError);
  EXPECT_NO_THROW(GrayImage(2, 1, std::vector<double>{0.0, 1.0}));
}

TEST(RegisteredPair, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(RegisteredPair(GrayImage(4, 4), GrayImage(4, 5)), DimensionError);
}

TEST(ToLuma, Bt601Weights) {
  EXPECT_DOUBLE_EQ(to_luma(1, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(to_luma(0, 0, 0), 0.0);
  EXPECT_NEAR(to_luma(1, 0, 0), 0.299, 1e-15);
  EXPECT_NEAR(to_luma(0, 1, 0), 0.587, 1e-15);
}

TEST(LoadImage, PgmBytesAreNormalized) {
  const fs::path p = temp_dir() / "two.pgm";
  write_bytes(p, std::string("P5\n2 2\n255\n") + std::string("\x00\xff\x80\x40", 4));
  const GrayImage img = load_image(p);
  ASSERT_EQ(img.width(), 2);
  ASSERT_EQ(img.height(), 2);
  EXPECT_EQ(img.pixels()[0], 0.0);
  EXPECT_EQ(img.pixels()[1], 1.0);
  EXPECT_DOUBLE_EQ(img.pixels()[2], 128.0 / 255.0);
  EXPECT_DOUBLE_EQ(img.pixels()[3], 64.0 / 255.0);
}

TEST(LoadImage, SinglePixelZero) {
  const fs::path p = temp_dir() / "one.pgm";
  write_bytes(p, std::string("P5\n# comment\n1 1\n255\n") + std::string(1, '\0'));
  const GrayImage img = load_image(p);
  ASSERT_EQ(img.size(), 1u);
  EXPECT_EQ(img.pixels()[0], 0.0);
}

TEST(LoadImage, RgbPngWhiteIsUnitLuma) {
  const fs::path p = temp_dir() / "white.png";
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 2;
  image.height = 1;
  image.format = PNG_FORMAT_RGB;
  const unsigned char rgb[] = {255, 255, 255, 255, 0, 0};
  ASSERT_TRUE(png_image_write_to_file(&image, p.string().c_str(), 0, rgb, 0, nullptr));
  const GrayImage img = load_image(p);
  EXPECT_DOUBLE_EQ(img.pixels()[0], 1.0);
  EXPECT_NEAR(img.pixels()[1], 0.299, 1e-12);
}

TEST(LoadImage, Errors) {
  EXPECT_THROW(load_image(temp_dir() / "missing.pgm"), InputError);
  const fs::path deep = temp_dir() / "deep.pgm";
  write_bytes(deep, std::string("P5\n1 1\n65535\n") + std::string(2, '\0'));
  try {
    load_image(deep);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("bit depth"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("deep.pgm"), std::string::npos);
  }
  const fs::path junk = temp_dir() / "junk.pgm";
  write_bytes(junk, "hello");
  EXPECT_THROW(load_image(junk), InputError);
}

TEST(SaveImage, RoundHalfUpQuantization) {
  EXPECT_EQ(quantize_byte(0.0), 0);
  EXPECT_EQ(quantize_byte(1.0), 255);
  EXPECT_EQ(quantize_byte(0.5), 128);

  const fs::path p = temp_dir() / "q.pgm";
  save_image(GrayImage(3, 1, std::vector<double>{0.0, 1.0, 0.5}), p);
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GE(bytes.size(), 3u);
  const std::string raster = bytes.substr(bytes.size() - 3);
  EXPECT_EQ(static_cast<unsigned char>(raster[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(raster[1]), 255);
  EXPECT_EQ(static_cast<unsigned char>(raster[2]), 128);
}

TEST(SaveImage, UnknownExtensionIsOutputError) {
  EXPECT_THROW(save_image(GrayImage(1, 1), temp_dir() / "x.bmp"), OutputError);
  EXPECT_THROW(save_image(GrayImage(1, 1), temp_dir() / "no_such_dir" / "x.pgm"), OutputError);
}

TEST(SaveImage, RoundTripWithinQuantizationError) {
  for (const char* ext : {".pgm", ".png"}) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      const GrayImage img = oracle::random_image(17, 9, seed);
      const fs::path p = temp_dir() / (std::string("rt") + ext);
      save_image(img, p);
      const GrayImage back = load_image(p);
      ASSERT_TRUE(back.same_shape(img));
      for (size_t i = 0; i < img.size(); ++i) {
        EXPECT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), 1.0 / 510.0 + 1e-15);
      }
      EXPECT_TRUE(is_8bit_quantized(back));
    }
  }
}

TEST(PatchMeans, ConstantImage) {
  const GrayImage img(9, 7, 0.5);
  for (PatchSpec spec : {PatchSpec{1, 1, 0.0}, PatchSpec{3, 2, 0.0}, PatchSpec{7, 3, 0.0}}) {
    const PatchMeanGrid g = patch_means(img, spec);
    for (double m : g.means) EXPECT_NEAR(m, 0.5, 1e-15);
    EXPECT_TRUE(std::none_of(g.background_mask.begin(), g.background_mask.end(), [](bool b) { return b; }));
  }
}

TEST(PatchMeans, AlternatingRowsSize2Stride2) {
  const GrayImage img(4, 4, std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1});
  const PatchMeanGrid g = patch_means(img, PatchSpec{2, 2, 0.0});
  ASSERT_EQ(g.rows, 2);
  ASSERT_EQ(g.cols, 2);
  for (double m : g.means) EXPECT_DOUBLE_EQ(m, 0.5);
}

TEST(PatchMeans, SinglePatchIsGlobalMean) {
  const GrayImage img = oracle::random_image(5, 5, 3);
  const PatchMeanGrid g = patch_means(img, PatchSpec{5, 3, 0.0});
  ASSERT_EQ(g.rows, 1);
  ASSERT_EQ(g.cols, 1);
  double sum = 0;
  for (double v : img.pixels()) sum += v;
  EXPECT_NEAR(g.means[0], sum / 25.0, 1e-15);
}

TEST(PatchMeans, PatchLargerThanImage) {
  EXPECT_THROW(patch_means(GrayImage(4, 6), PatchSpec{5, 1, 0.0}), DimensionError);
  EXPECT_THROW(patch_means(GrayImage(8, 8), PatchSpec{3, 0, 0.0}), InputError);
}

TEST(PatchMeans, MatchesDirectSummationOracle) {
  uint64_t seed = 100;
  for (int side : {8, 23, 64}) {
    const GrayImage img = oracle::random_image(side, side - 3, seed++);
    for (int size = 1; size <= std::min(8, img.height()); ++size) {
      for (int stride = 1; stride <= 8; ++stride) {
        const PatchSpec spec{size, stride, 0.0};
        const PatchMeanGrid g = patch_means(img, spec);
        ASSERT_EQ(g.rows, (img.height() - size) / stride + 1);
        ASSERT_EQ(g.cols, (img.width() - size) / stride + 1);
        ASSERT_EQ(g.means.size(), static_cast<size_t>(g.rows) * g.cols);
        for (int r = 0; r < g.rows; ++r) {
          for (int c = 0; c < g.cols; ++c) {
            const double direct = oracle::direct_patch_mean(img.pixels(), img.width(), r * stride, c * stride, size);
            ASSERT_NEAR(g.means[static_cast<size_t>(r) * g.cols + c], direct, 1e-12);
          }
        }
      }
    }
  }
}
