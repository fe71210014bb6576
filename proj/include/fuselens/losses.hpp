#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fuselens/image.hpp"

namespace fuselens {

/// Stabilizing constant of the MEF-SSIM patch score.
inline constexpr double kMefStabilizer = 9e-4;

/// Flat-patch threshold shared by the patch decomposition conventions.
inline constexpr double kFlatEpsilon = 1e-12;

/// Upper bound on the structure-weighting exponent tan(pi R / 2).
inline constexpr double kMaxWeightExponent = 20.0;

struct LossWeights {
  double alpha = 0.005;  // semantic loss
  double beta = 1.0;     // MEF-SSIM loss

  void validate() const;
};

struct PatchDecomposition {
  double contrast = 0.0;
  std::vector<double> structure;
  double luminance = 0.0;
};

struct LossReport {
  std::optional<double> reconstruct;
  double sl = 0.0;
  double mef_ssim = 0.0;
  double composite = 0.0;
  LossWeights weights;
};

/// Sum of the l2 distances between sources and their reconstructions.
double reconstruct_loss(const RegisteredPair& x, const RegisteredPair& x_hat);

// ---------------------------------------------------------------------------
// Semantic loss
// ---------------------------------------------------------------------------

/// Pairwise patch-brightness consistency between the sources and a fused
/// image. Source statistics are computed once so the same instance can score
/// many candidate fused images.
///
/// A patch is background when both source means fall below the PatchSpec
/// threshold; background patches take no part in the pair enumeration. The
/// normalizer is (M+1)M/2 with M the number of kept patches.
class SemanticLoss {
 public:
  SemanticLoss(const RegisteredPair& x, const PatchSpec& spec);

  double value(std::span<const double> y) const;

  /// Same value as value(), writing d/dy into `gradient` (overwritten).
  /// Subgradient conventions: sign(0) = 0, the max over modalities breaks
  /// ties toward ct.
  double value_and_gradient(std::span<const double> y, std::span<double> gradient) const;

  /// Exact integer evaluation for images on the 8-bit grid. Falls back to
  /// value() when either the sources or `y` are not 8-bit quantized.
  double value(const GrayImage& y) const;

  int kept_patches() const noexcept { return static_cast<int>(origins_.size()); }
  double normalizer() const noexcept;

 private:
  struct Origin {
    int row;
    int col;
  };

  std::vector<double> fused_means(std::span<const double> y) const;
  bool integer_path_applicable() const;

  int width_;
  int height_;
  PatchSpec spec_;
  std::vector<Origin> origins_;
  std::vector<double> ct_means_;
  std::vector<double> mr_means_;
  bool sources_quantized_ = false;
  std::vector<int16_t> ct_sums_;
  std::vector<int16_t> mr_sums_;
};

double semantic_loss(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec);
Plane semantic_loss_grad(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec);

// ---------------------------------------------------------------------------
// MEF-SSIM
// ---------------------------------------------------------------------------

/// contrast * structure + luminance == p. Flat patches (contrast <= 1e-12)
/// get a zero structure vector.
PatchDecomposition decompose_patch(std::span<const double> p);

/// ||a + b|| / (||a|| + ||b||) for mean-removed patches; 1 when both are flat.
double structure_consistency(std::span<const double> ct_centered, std::span<const double> mr_centered);

/// Mean-removed target patch: maximal source contrast with a
/// consistency-weighted blend of the source structures.
std::vector<double> desired_patch(std::span<const double> p_ct, std::span<const double> p_mr);

/// SSIM-style agreement between the desired patch and the fused patch, using
/// population (1/n) statistics.
double mef_score(std::span<const double> p_ct, std::span<const double> p_mr, std::span<const double> p_y);

/// 1 - mean patch score over every patch location. Desired patches depend
/// only on the sources and are precomputed at construction.
class MefSsimLoss {
 public:
  MefSsimLoss(const RegisteredPair& x, const PatchSpec& spec);

  double value(std::span<const double> y) const;
  double value_and_gradient(std::span<const double> y, std::span<double> gradient) const;

  int patch_count() const noexcept { return rows_ * cols_; }

 private:
  template <bool WithGradient>
  double evaluate(std::span<const double> y, std::span<double> gradient) const;

  int width_;
  int height_;
  PatchSpec spec_;
  int rows_;
  int cols_;
  // Centered desired patches, patch_count() * size * size values.
  std::vector<double> targets_;
  std::vector<double> target_variance_;
};

double mef_ssim_loss(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec);
Plane mef_ssim_grad(const RegisteredPair& x, const GrayImage& y, const PatchSpec& spec);

// ---------------------------------------------------------------------------
// Composite objective
// ---------------------------------------------------------------------------

/// alpha * semantic + beta * MEF-SSIM over a fixed source pair.
class CompositeObjective {
 public:
  CompositeObjective(const RegisteredPair& x, const LossWeights& weights, const PatchSpec& sl_spec,
                     const PatchSpec& mef_spec);

  LossReport evaluate(std::span<const double> y) const;
  LossReport evaluate(std::span<const double> y, std::span<double> gradient) const;

  const LossWeights& weights() const noexcept { return weights_; }

 private:
  LossWeights weights_;
  SemanticLoss semantic_;
  MefSsimLoss mef_;
};

/// Full objective. When `x_hat` is given the reconstruction term is added;
/// it has no dependence on y, so `gradient` (if non-null) only receives the
/// semantic and MEF-SSIM parts.
LossReport composite_loss(const RegisteredPair& x, const GrayImage& y, const LossWeights& weights,
                          const PatchSpec& sl_spec, const PatchSpec& mef_spec,
                          const RegisteredPair* x_hat = nullptr, Plane* gradient = nullptr);

}  // namespace fuselens
