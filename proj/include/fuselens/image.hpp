#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace fuselens {

/// Unconstrained real-valued 2-D field, row-major. Used for gradients and
/// intermediate pyramid levels where values leave [0,1].
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  double& at(int row, int col) { return data[static_cast<size_t>(row) * width + col]; }
  double at(int row, int col) const { return data[static_cast<size_t>(row) * width + col]; }
};

/// Grayscale image with intensities in [0,1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  /// Throws InputError if the data length or any intensity is out of range.
  GrayImage(int width, int height, std::vector<double> data);

  /// Builds an image by clamping arbitrary values into [0,1].
  static GrayImage clamped(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int row, int col) const { return data_[static_cast<size_t>(row) * width_ + col]; }
  std::span<const double> pixels() const noexcept { return data_; }

  bool same_shape(const GrayImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Pixel-registered CT-like / MR-like source pair.
struct RegisteredPair {
  GrayImage ct;
  GrayImage mr;

  /// Throws DimensionError when the two images differ in shape.
  RegisteredPair(GrayImage ct_image, GrayImage mr_image);

  int width() const noexcept { return ct.width(); }
  int height() const noexcept { return ct.height(); }
};

/// Square patch enumeration parameters. Patches overhanging the image border
/// are not emitted.
struct PatchSpec {
  int size = 5;
  int stride = 3;
  double background_threshold = 0.01;

  /// Throws InputError on invalid fields, DimensionError when the patch does
  /// not fit an image of the given dimensions.
  void validate(int width, int height) const;

  int grid_rows(int height) const { return (height - size) / stride + 1; }
  int grid_cols(int width) const { return (width - size) / stride + 1; }
};

struct PatchMeanGrid {
  int rows = 0;
  int cols = 0;
  std::vector<double> means;
  std::vector<bool> background_mask;
};

/// BT.601 luma, clamped to [0,1].
double to_luma(double r, double g, double b);

/// Per-patch means through a summed-area table.
PatchMeanGrid patch_means(const GrayImage& img, const PatchSpec& spec);

/// Reads binary PGM (P5, maxval 255) or 8-bit grayscale/RGB PNG. RGB input
/// is converted with to_luma.
GrayImage load_image(const std::filesystem::path& path);

/// Writes 8-bit PGM or PNG according to the extension, quantizing with
/// round-half-up of v*255.
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// round-half-up quantization used by save_image.
unsigned char quantize_byte(double v);

/// True when every intensity lies on the k/255 grid, i.e. the image could have
/// come from an 8-bit file.
bool is_8bit_quantized(const GrayImage& img);

}  // namespace fuselens
