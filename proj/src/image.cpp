#include "fuselens/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "fuselens/errors.hpp"

namespace fuselens {

namespace {

std::string describe(const std::filesystem::path& path, const std::string& reason) {
  return path.string() + ": " + reason;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Skips whitespace and '#' comments in a PNM header.
void skip_pnm_space(std::istream& in) {
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

GrayImage read_pgm(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw InputError(describe(path, "only binary PGM (P5) is supported"));
  long width = 0, height = 0, maxval = 0;
  skip_pnm_space(in);
  in >> width;
  skip_pnm_space(in);
  in >> height;
  skip_pnm_space(in);
  in >> maxval;
  if (!in || width <= 0 || height <= 0) throw InputError(describe(path, "malformed PGM header"));
  if (maxval != 255) {
    throw InputError(describe(path, "unsupported bit depth (maxval " + std::to_string(maxval) + ")"));
  }
  in.get();  // single whitespace byte before raster
  const auto offset = static_cast<size_t>(in.tellg());
  const size_t count = static_cast<size_t>(width) * static_cast<size_t>(height);
  if (bytes.size() < offset + count) throw InputError(describe(path, "truncated PGM raster"));

  std::vector<double> data(count);
  for (size_t i = 0; i < count; ++i) data[i] = bytes[offset + i] / 255.0;
  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

GrayImage read_png(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw InputError(describe(path, image.message));
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw InputError(describe(path, "unsupported bit depth (16-bit PNG)"));
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw InputError(describe(path, "PNG alpha channel is not supported"));
  }

  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<png_byte> raster(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raster.data(), 0, nullptr)) {
    throw InputError(describe(path, image.message));
  }

  const size_t count = static_cast<size_t>(width) * height;
  std::vector<double> data(count);
  if (color) {
    for (size_t i = 0; i < count; ++i) {
      data[i] = to_luma(raster[3 * i] / 255.0, raster[3 * i + 1] / 255.0, raster[3 * i + 2] / 255.0);
    }
  } else {
    for (size_t i = 0; i < count; ++i) data[i] = raster[i] / 255.0;
  }
  return GrayImage(width, height, std::move(data));
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height, std::vector<double>(static_cast<size_t>(std::max(width, 0)) * std::max(height, 0), fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw InputError("negative image dimensions");
  if (data_.size() != static_cast<size_t>(width) * static_cast<size_t>(height)) {
    throw InputError("image data length does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("image intensity outside [0,1]: " + std::to_string(v));
  }
}

GrayImage GrayImage::clamped(int width, int height, std::vector<double> data) {
  for (double& v : data) v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return GrayImage(width, height, std::move(data));
}

RegisteredPair::RegisteredPair(GrayImage ct_image, GrayImage mr_image)
    : ct(std::move(ct_image)), mr(std::move(mr_image)) {
  if (!ct.same_shape(mr)) {
    throw DimensionError("registered pair shape mismatch: ct " + std::to_string(ct.width()) + "x" +
                         std::to_string(ct.height()) + ", mr " + std::to_string(mr.width()) + "x" +
                         std::to_string(mr.height()));
  }
}

void PatchSpec::validate(int width, int height) const {
  if (size < 1) throw InputError("patch size must be >= 1");
  if (stride < 1) throw InputError("patch stride must be >= 1");
  if (!(background_threshold >= 0.0 && background_threshold <= 1.0)) {
    throw InputError("background threshold must lie in [0,1]");
  }
  if (size > std::min(width, height)) {
    throw DimensionError("patch size " + std::to_string(size) + " exceeds image " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
}

double to_luma(double r, double g, double b) {
  return std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0);
}

PatchMeanGrid patch_means(const GrayImage& img, const PatchSpec& spec) {
  spec.validate(img.width(), img.height());
  const int w = img.width();
  const int h = img.height();
  const int stride_sat = w + 1;
  std::vector<double> sat(static_cast<size_t>(w + 1) * (h + 1), 0.0);
  for (int r = 0; r < h; ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < w; ++c) {
      row_sum += img.at(r, c);
      sat[static_cast<size_t>(r + 1) * stride_sat + c + 1] = sat[static_cast<size_t>(r) * stride_sat + c + 1] + row_sum;
    }
  }

  PatchMeanGrid grid;
  grid.rows = spec.grid_rows(h);
  grid.cols = spec.grid_cols(w);
  grid.means.resize(static_cast<size_t>(grid.rows) * grid.cols);
  grid.background_mask.assign(grid.means.size(), false);
  const double inv_area = 1.0 / (static_cast<double>(spec.size) * spec.size);
  for (int pr = 0; pr < grid.rows; ++pr) {
    const int r0 = pr * spec.stride;
    const int r1 = r0 + spec.size;
    for (int pc = 0; pc < grid.cols; ++pc) {
      const int c0 = pc * spec.stride;
      const int c1 = c0 + spec.size;
      const double sum = sat[static_cast<size_t>(r1) * stride_sat + c1] - sat[static_cast<size_t>(r0) * stride_sat + c1] -
                         sat[static_cast<size_t>(r1) * stride_sat + c0] + sat[static_cast<size_t>(r0) * stride_sat + c0];
      grid.means[static_cast<size_t>(pr) * grid.cols + pc] = std::clamp(sum * inv_area, 0.0, 1.0);
    }
  }
  return grid;
}

GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(describe(path, "cannot open file"));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return read_png(path, bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return read_pgm(path, bytes);
  throw InputError(describe(path, "unrecognized image format (expected PGM or PNG)"));
}

unsigned char quantize_byte(double v) {
  return static_cast<unsigned char>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), bytes.begin(), quantize_byte);

  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
      throw OutputError(describe(path, image.message));
    }
    return;
  }
  if (ext != ".pgm") throw OutputError(describe(path, "unsupported output extension (use .pgm or .png)"));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError(describe(path, "cannot open for writing"));
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw OutputError(describe(path, "write failed"));
}

bool is_8bit_quantized(const GrayImage& img) {
  for (double v : img.pixels()) {
    const double scaled = v * 255.0;
    if (std::abs(scaled - std::round(scaled)) > 1e-9) return false;
  }
  return true;
}

}  // namespace fuselens
