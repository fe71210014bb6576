#include <cmath>
#include <cstdint>
#include <limits>

#include "fuselens/errors.hpp"
#include "fuselens/losses.hpp"
#include "sat.hpp"

namespace fuselens {

namespace {

// Largest patch whose 8-bit sum fits an int16 lane.
constexpr int kMaxIntegerPatch = 11;

inline double sign_of(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

std::vector<int> byte_values(const GrayImage& img) {
  std::vector<int> bytes(img.size());
  for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<int>(std::lround(img.pixels()[i] * 255.0));
  return bytes;
}

}  // namespace

SemanticLoss::SemanticLoss(const RegisteredPair& x, const PatchSpec& spec)
    : width_(x.width()), height_(x.height()), spec_(spec) {
  spec.validate(width_, height_);
  const PatchMeanGrid ct = patch_means(x.ct, spec);
  const PatchMeanGrid mr = patch_means(x.mr, spec);

  std::vector<size_t> kept_index;
  for (int pr = 0; pr < ct.rows; ++pr) {
    for (int pc = 0; pc < ct.cols; ++pc) {
      const size_t i = static_cast<size_t>(pr) * ct.cols + pc;
      if (std::max(ct.means[i], mr.means[i]) < spec.background_threshold) continue;
      origins_.push_back({pr * spec.stride, pc * spec.stride});
      ct_means_.push_back(ct.means[i]);
      mr_means_.push_back(mr.means[i]);
    }
  }

  sources_quantized_ = is_8bit_quantized(x.ct) && is_8bit_quantized(x.mr);
  if (sources_quantized_ && integer_path_applicable()) {
    const auto ct_sat = detail::summed_area_table<int64_t, int>(std::span<const int>(byte_values(x.ct)), width_, height_);
    const auto mr_sat = detail::summed_area_table<int64_t, int>(std::span<const int>(byte_values(x.mr)), width_, height_);
    for (const Origin& o : origins_) {
      ct_sums_.push_back(static_cast<int16_t>(detail::box_sum(ct_sat, width_, o.row, o.col, spec_.size)));
      mr_sums_.push_back(static_cast<int16_t>(detail::box_sum(mr_sat, width_, o.row, o.col, spec_.size)));
    }
  }
}

double SemanticLoss::normalizer() const noexcept {
  const double m = static_cast<double>(origins_.size());
  return (m + 1.0) * m / 2.0;
}

bool SemanticLoss::integer_path_applicable() const {
  if (spec_.size > kMaxIntegerPatch) return false;
  // Per-row int32 accumulation must not overflow.
  const double row_bound = static_cast<double>(origins_.size()) * 255.0 * spec_.size * spec_.size;
  return row_bound < static_cast<double>(std::numeric_limits<int32_t>::max());
}

std::vector<double> SemanticLoss::fused_means(std::span<const double> y) const {
  if (y.size() != static_cast<size_t>(width_) * height_) throw DimensionError("fused image shape mismatch");
  const auto sat = detail::summed_area_table<double, double>(y, width_, height_);
  const double inv_area = 1.0 / (static_cast<double>(spec_.size) * spec_.size);
  std::vector<double> means(origins_.size());
  for (size_t i = 0; i < origins_.size(); ++i) {
    means[i] = detail::box_sum(sat, width_, origins_[i].row, origins_[i].col, spec_.size) * inv_area;
  }
  return means;
}

double SemanticLoss::value(std::span<const double> y) const {
  const std::vector<double> ym = fused_means(y);
  const size_t m = origins_.size();
  if (m < 2) return 0.0;
  const double* xs = ct_means_.data();
  const double* zs = mr_means_.data();
  const double* ys = ym.data();

  double total = 0.0;
  for (size_t i = 0; i + 1 < m; ++i) {
    const double xi = xs[i], zi = zs[i], yi = ys[i];
    double row = 0.0;
#pragma omp simd reduction(+ : row)
    for (size_t j = i + 1; j < m; ++j) {
      const double fused = std::fabs(yi - ys[j]);
      const double d_ct = std::fabs(std::fabs(xi - xs[j]) - fused);
      const double d_mr = std::fabs(std::fabs(zi - zs[j]) - fused);
      row += d_ct >= d_mr ? d_ct : d_mr;
    }
    total += row;
  }
  return total / normalizer();
}

double SemanticLoss::value_and_gradient(std::span<const double> y, std::span<double> gradient) const {
  if (gradient.size() != y.size()) throw DimensionError("gradient buffer shape mismatch");
  const std::vector<double> ym = fused_means(y);
  std::fill(gradient.begin(), gradient.end(), 0.0);
  const size_t m = origins_.size();
  if (m < 2) return 0.0;

  const double* xs = ct_means_.data();
  const double* zs = mr_means_.data();
  const double* ys = ym.data();
  std::vector<double> mean_grad(m, 0.0);
  double* g = mean_grad.data();

  double total = 0.0;
  for (size_t i = 0; i + 1 < m; ++i) {
    const double xi = xs[i], zi = zs[i], yi = ys[i];
    double row = 0.0;
    double gi = 0.0;
#pragma omp simd reduction(+ : row, gi)
    for (size_t j = i + 1; j < m; ++j) {
      const double diff = yi - ys[j];
      const double fused = std::fabs(diff);
      const double d_ct = std::fabs(xi - xs[j]) - fused;
      const double d_mr = std::fabs(zi - zs[j]) - fused;
      const double d = std::fabs(d_ct) >= std::fabs(d_mr) ? d_ct : d_mr;
      row += std::fabs(d);
      // d|d|/dy_i = sign(d) * d(-|diff|)/dy_i = -sign(d) * sign(diff)
      const double s = -sign_of(d) * sign_of(diff);
      gi += s;
      g[j] -= s;
    }
    g[i] += gi;
    total += row;
  }

  const double norm = normalizer();
  const double scale = 1.0 / (norm * spec_.size * spec_.size);
  for (size_t i = 0; i < m; ++i) {
    if (mean_grad[i] == 0.0) continue;
    const double share = mean_grad[i] * scale;
    for (int r = 0; r < spec_.size; ++r) {
      double* out = gradient.data() + static_cast<size_t>(origins_[i].row + r) * width_ + origins_[i].col;
      for (int c = 0; c < spec_.size; ++c) out[c] += share;
    }
  }
  return total / norm;
}

double SemanticLoss::value(const GrayImage& y) const {
  if (y.width() != width_ || y.height() != height_) throw DimensionError("fused image shape mismatch");
  if (!sources_quantized_ || ct_sums_.size() != origins_.size() || !is_8bit_quantized(y)) return value(y.pixels());
  const size_t m = origins_.size();
  if (m < 2) return 0.0;

  const auto y_sat = detail::summed_area_table<int64_t, int>(std::span<const int>(byte_values(y)), width_, height_);
  std::vector<int16_t> y_sums(m);
  for (size_t i = 0; i < m; ++i) {
    y_sums[i] = static_cast<int16_t>(detail::box_sum(y_sat, width_, origins_[i].row, origins_[i].col, spec_.size));
  }

  const int16_t* xs = ct_sums_.data();
  const int16_t* zs = mr_sums_.data();
  const int16_t* ys = y_sums.data();
  int64_t total = 0;
  for (size_t i = 0; i + 1 < m; ++i) {
    const int16_t xi = xs[i], zi = zs[i], yi = ys[i];
    int32_t row = 0;
    for (size_t j = i + 1; j < m; ++j) {
      int16_t fused = static_cast<int16_t>(yi - ys[j]);
      fused = fused < 0 ? static_cast<int16_t>(-fused) : fused;
      int16_t a_ct = static_cast<int16_t>(xi - xs[j]);
      a_ct = a_ct < 0 ? static_cast<int16_t>(-a_ct) : a_ct;
      int16_t a_mr = static_cast<int16_t>(zi - zs[j]);
      a_mr = a_mr < 0 ? static_cast<int16_t>(-a_mr) : a_mr;
      int16_t d_ct = static_cast<int16_t>(a_ct - fused);
      d_ct = d_ct < 0 ? static_cast<int16_t>(-d_ct) : d_ct;
      int16_t d_mr = static_cast<int16_t>(a_mr - fused);
      d_mr = d_mr < 0 ? static_cast<int16_t>(-d_mr) : d_mr;
      row += d_ct >= d_mr ? d_ct : d_mr;
    }
    total += row;
  }
  const double unit = 255.0 * spec_.size * spec_.size;
  return static_cast<double>(total) / unit / normalizer();
}

double semantic_loss(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec) {
  if (!y.same_shape(x.ct)) throw DimensionError("fused image shape differs from sources");
  return SemanticLoss(x, spec).value(y);
}

Plane semantic_loss_grad(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec) {
  if (!y.same_shape(x.ct)) throw DimensionError("fused image shape differs from sources");
  Plane grad(y.width(), y.height());
  SemanticLoss(x, spec).value_and_gradient(y.pixels(), grad.data);
  return grad;
}

}  // namespace fuselens
