#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuselens/image.hpp"
#include "fuselens/losses.hpp"

namespace fuselens {

enum class InitMode { kAverage, kCt, kMr };

std::string to_string(InitMode mode);
/// Throws InputError for unknown names.
InitMode parse_init_mode(const std::string& name);

struct OptimConfig {
  LossWeights weights;
  PatchSpec sl_spec{5, 3, 0.01};
  PatchSpec mef_spec{7, 1, 0.0};
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_iters = 300;
  double tol = 1e-6;
  InitMode init = InitMode::kCt;
  // The optimizer itself is deterministic; the seed is carried for
  // provenance in traces and reports.
  uint64_t seed = 0;

  void validate() const;
};

struct FusionResult {
  GrayImage fused;
  /// Loss of the initial image, before any step.
  LossReport initial;
  /// One report per accepted iteration, evaluated after the step.
  std::vector<LossReport> loss_trace;
  int iterations_run = 0;
  bool converged = false;
};

GrayImage fuse_average(const RegisteredPair& x);

/// Burt-Adelson pyramid fusion: max-absolute band-pass selection (ties to
/// ct), averaged coarse level. `levels` counts all pyramid levels including
/// the coarse residual.
GrayImage fuse_laplacian(const RegisteredPair& x, int levels);

/// Projected Adam descent on alpha * SL + beta * (1 - MEF-SSIM) directly over
/// the fused pixels. A step is accepted only if the composite loss does not
/// increase; otherwise the step length is halved and retried. Stops after
/// max_iters or once the loss changes by less than tol.
///
/// Throws DivergenceError on a non-finite loss or gradient.
FusionResult fuse_variational(const RegisteredPair& x, const OptimConfig& cfg);

}  // namespace fuselens
