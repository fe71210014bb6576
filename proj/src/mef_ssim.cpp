#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fuselens/errors.hpp"
#include "fuselens/losses.hpp"

namespace fuselens {

namespace {

double norm2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Reusable buffers for desired-patch synthesis.
struct Workspace {
  std::vector<double> ct_centered;
  std::vector<double> mr_centered;
  std::vector<double> blend;

  explicit Workspace(size_t n) : ct_centered(n), mr_centered(n), blend(n) {}
};

void desired_patch_into(std::span<const double> p_ct, std::span<const double> p_mr, std::span<double> out,
                        Workspace& ws) {
  const size_t n = p_ct.size();
  const double ct_mean = mean_of(p_ct);
  const double mr_mean = mean_of(p_mr);
  for (size_t i = 0; i < n; ++i) {
    ws.ct_centered[i] = p_ct[i] - ct_mean;
    ws.mr_centered[i] = p_mr[i] - mr_mean;
  }
  const double ct_contrast = norm2(ws.ct_centered);
  const double mr_contrast = norm2(ws.mr_centered);
  const double target_contrast = std::max(ct_contrast, mr_contrast);
  const double consistency = structure_consistency(ws.ct_centered, ws.mr_centered);

  double ct_weight = 0.0;
  double mr_weight = 0.0;
  if (consistency >= 1.0 - 1e-9) {
    // Collinear structures: the higher-contrast source alone, ties to ct.
    ct_weight = ct_contrast >= mr_contrast ? 1.0 : 0.0;
    mr_weight = 1.0 - ct_weight;
  } else {
    // Contrasts are normalized by their maximum before exponentiation; the
    // blend is invariant to that common scale and the weights cannot underflow.
    const double exponent = std::min(std::tan(std::numbers::pi * consistency / 2.0), kMaxWeightExponent);
    ct_weight = std::pow(ct_contrast / target_contrast, exponent);
    mr_weight = std::pow(mr_contrast / target_contrast, exponent);
  }

  const double ct_scale = ct_contrast > kFlatEpsilon ? 1.0 / ct_contrast : 0.0;
  const double mr_scale = mr_contrast > kFlatEpsilon ? 1.0 / mr_contrast : 0.0;
  const double weight_sum = ct_weight + mr_weight;
  double a = 0.5, b = 0.5;
  if (weight_sum > kFlatEpsilon) {
    a = ct_weight / weight_sum;
    b = mr_weight / weight_sum;
  }
  for (size_t i = 0; i < n; ++i) {
    ws.blend[i] = a * ws.ct_centered[i] * ct_scale + b * ws.mr_centered[i] * mr_scale;
  }
  const double blend_norm = norm2(ws.blend);
  const double scale = blend_norm > kFlatEpsilon ? target_contrast / blend_norm : 0.0;
  for (size_t i = 0; i < n; ++i) out[i] = ws.blend[i] * scale;
}

}  // namespace

PatchDecomposition decompose_patch(std::span<const double> p) {
  PatchDecomposition d;
  d.luminance = mean_of(p);
  d.structure.resize(p.size());
  for (size_t i = 0; i < p.size(); ++i) d.structure[i] = p[i] - d.luminance;
  d.contrast = norm2(d.structure);
  if (d.contrast > kFlatEpsilon) {
    for (double& v : d.structure) v /= d.contrast;
  } else {
    std::fill(d.structure.begin(), d.structure.end(), 0.0);
  }
  return d;
}

double structure_consistency(std::span<const double> ct_centered, std::span<const double> mr_centered) {
  if (ct_centered.size() != mr_centered.size()) throw DimensionError("structure_consistency: length mismatch");
  double sum_sq = 0.0;
  for (size_t i = 0; i < ct_centered.size(); ++i) {
    const double s = ct_centered[i] + mr_centered[i];
    sum_sq += s * s;
  }
  const double denom = norm2(ct_centered) + norm2(mr_centered);
  if (denom <= 2.0 * kFlatEpsilon) return 1.0;
  return std::clamp(std::sqrt(sum_sq) / denom, 0.0, 1.0);
}

std::vector<double> desired_patch(std::span<const double> p_ct, std::span<const double> p_mr) {
  if (p_ct.size() != p_mr.size()) throw DimensionError("desired_patch: length mismatch");
  std::vector<double> out(p_ct.size());
  Workspace ws(p_ct.size());
  desired_patch_into(p_ct, p_mr, out, ws);
  return out;
}

double mef_score(std::span<const double> p_ct, std::span<const double> p_mr, std::span<const double> p_y) {
  if (p_y.size() != p_ct.size()) throw DimensionError("mef_score: length mismatch");
  const std::vector<double> target = desired_patch(p_ct, p_mr);
  const double n = static_cast<double>(p_y.size());
  const double target_mean = mean_of(target);
  const double y_mean = mean_of(p_y);
  double var_target = 0.0, var_y = 0.0, cov = 0.0;
  for (size_t i = 0; i < p_y.size(); ++i) {
    const double dt = target[i] - target_mean;
    const double dy = p_y[i] - y_mean;
    var_target += dt * dt;
    var_y += dy * dy;
    cov += dt * dy;
  }
  var_target /= n;
  var_y /= n;
  cov /= n;
  return (2.0 * cov + kMefStabilizer) / (var_target + var_y + kMefStabilizer);
}

MefSsimLoss::MefSsimLoss(const RegisteredPair& x, const PatchSpec& spec)
    : width_(x.width()), height_(x.height()), spec_(spec) {
  spec.validate(width_, height_);
  rows_ = spec.grid_rows(height_);
  cols_ = spec.grid_cols(width_);
  const size_t n = static_cast<size_t>(spec.size) * spec.size;
  targets_.resize(static_cast<size_t>(patch_count()) * n);
  target_variance_.resize(patch_count());

  std::vector<double> ct_patch(n), mr_patch(n);
  Workspace ws(n);
  for (int pr = 0; pr < rows_; ++pr) {
    for (int pc = 0; pc < cols_; ++pc) {
      const int r0 = pr * spec.stride;
      const int c0 = pc * spec.stride;
      for (int r = 0; r < spec.size; ++r) {
        for (int c = 0; c < spec.size; ++c) {
          ct_patch[r * spec.size + c] = x.ct.at(r0 + r, c0 + c);
          mr_patch[r * spec.size + c] = x.mr.at(r0 + r, c0 + c);
        }
      }
      const size_t k = static_cast<size_t>(pr) * cols_ + pc;
      std::span<double> target(targets_.data() + k * n, n);
      desired_patch_into(ct_patch, mr_patch, target, ws);
      const double mean = mean_of(target);
      double var = 0.0;
      for (double& v : target) {
        v -= mean;
        var += v * v;
      }
      target_variance_[k] = var / static_cast<double>(n);
    }
  }
}

template <bool WithGradient>
double MefSsimLoss::evaluate(std::span<const double> y, std::span<double> gradient) const {
  if (y.size() != static_cast<size_t>(width_) * height_) throw DimensionError("fused image shape mismatch");
  const int size = spec_.size;
  const size_t n = static_cast<size_t>(size) * size;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_patches = 1.0 / static_cast<double>(patch_count());
  if constexpr (WithGradient) std::fill(gradient.begin(), gradient.end(), 0.0);

  std::vector<double> window(n);
  double score_sum = 0.0;
  for (int pr = 0; pr < rows_; ++pr) {
    for (int pc = 0; pc < cols_; ++pc) {
      const int r0 = pr * spec_.stride;
      const int c0 = pc * spec_.stride;
      double y_sum = 0.0;
      for (int r = 0; r < size; ++r) {
        const double* src = y.data() + static_cast<size_t>(r0 + r) * width_ + c0;
        for (int c = 0; c < size; ++c) {
          window[r * size + c] = src[c];
          y_sum += src[c];
        }
      }
      const double y_mean = y_sum * inv_n;
      const size_t k = static_cast<size_t>(pr) * cols_ + pc;
      const double* target = targets_.data() + k * n;
      double var_y = 0.0, cov = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double dy = window[i] - y_mean;
        window[i] = dy;
        var_y += dy * dy;
        cov += target[i] * dy;
      }
      var_y *= inv_n;
      cov *= inv_n;
      const double numer = 2.0 * cov + kMefStabilizer;
      const double denom = target_variance_[k] + var_y + kMefStabilizer;
      score_sum += numer / denom;

      if constexpr (WithGradient) {
        // d(1 - mean score)/dy = -(1/P) * (2/n) * (t * D - N * (y - mean y)) / D^2
        const double factor = -inv_patches * 2.0 * inv_n / (denom * denom);
        for (int r = 0; r < size; ++r) {
          double* out = gradient.data() + static_cast<size_t>(r0 + r) * width_ + c0;
          for (int c = 0; c < size; ++c) {
            const size_t i = static_cast<size_t>(r) * size + c;
            out[c] += factor * (target[i] * denom - numer * window[i]);
          }
        }
      }
    }
  }
  return 1.0 - score_sum * inv_patches;
}

double MefSsimLoss::value(std::span<const double> y) const { return evaluate<false>(y, {}); }

double MefSsimLoss::value_and_gradient(std::span<const double> y, std::span<double> gradient) const {
  if (gradient.size() != y.size()) throw DimensionError("gradient buffer shape mismatch");
  return evaluate<true>(y, gradient);
}

double mef_ssim_loss(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec) {
  if (!y.same_shape(x.ct)) throw DimensionError("fused image shape differs from sources");
  return MefSsimLoss(x, spec).value(y.pixels());
}

Plane mef_ssim_grad(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec) {
  if (!y.same_shape(x.ct)) throw DimensionError("fused image shape differs from sources");
  Plane grad(y.width(), y.height());
  MefSsimLoss(x, spec).value_and_gradient(y.pixels(), grad.data);
  return grad;
}

}  // namespace fuselens
