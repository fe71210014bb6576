#include "fuselens/fuse.hpp"

#include <algorithm>
#include <cmath>

#include "fuselens/errors.hpp"
#include "fuselens/pyramid.hpp"

namespace fuselens {

namespace {

constexpr int kMaxStepHalvings = 30;

Plane to_plane(const GrayImage& img) {
  Plane p(img.width(), img.height());
  std::copy(img.pixels().begin(), img.pixels().end(), p.data.begin());
  return p;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void check_finite(const LossReport& report, std::span<const double> gradient, int iteration) {
  if (!std::isfinite(report.composite)) throw DivergenceError(iteration, "non-finite loss");
  if (!all_finite(gradient)) throw DivergenceError(iteration, "non-finite gradient");
}

}  // namespace

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kAverage:
      return "average";
    case InitMode::kCt:
      return "ct";
    case InitMode::kMr:
      return "mr";
  }
  return "average";
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "average") return InitMode::kAverage;
  if (name == "ct") return InitMode::kCt;
  if (name == "mr") return InitMode::kMr;
  throw InputError("unknown init mode '" + name + "' (expected average, ct or mr)");
}

void OptimConfig::validate() const {
  weights.validate();
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (max_iters < 1) throw InputError("max_iters must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw InputError("moment decay rates must lie in (0,1)");
  }
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (!(tol >= 0.0)) throw InputError("tol must be non-negative");
}

GrayImage fuse_average(const RegisteredPair& x) {
  std::vector<double> data(x.ct.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = (x.ct.pixels()[i] + x.mr.pixels()[i]) / 2.0;
  return GrayImage::clamped(x.width(), x.height(), std::move(data));
}

GrayImage fuse_laplacian(const RegisteredPair& x, int levels) {
  if (levels < 1) throw InputError("pyramid levels must be >= 1");
  if (levels >= 31 || std::min(x.width(), x.height()) < (1 << levels)) {
    throw DimensionError("image too small for " + std::to_string(levels) + " pyramid levels");
  }
  const auto ct_bands = pyramid::laplacian(to_plane(x.ct), levels);
  const auto mr_bands = pyramid::laplacian(to_plane(x.mr), levels);

  std::vector<Plane> fused = ct_bands;
  for (size_t l = 0; l + 1 < fused.size(); ++l) {
    for (size_t i = 0; i < fused[l].data.size(); ++i) {
      const double a = ct_bands[l].data[i];
      const double b = mr_bands[l].data[i];
      fused[l].data[i] = std::abs(a) >= std::abs(b) ? a : b;
    }
  }
  Plane& coarse = fused.back();
  for (size_t i = 0; i < coarse.data.size(); ++i) {
    coarse.data[i] = (ct_bands.back().data[i] + mr_bands.back().data[i]) / 2.0;
  }
  Plane out = pyramid::collapse(fused);
  return GrayImage::clamped(out.width, out.height, std::move(out.data));
}

FusionResult fuse_variational(const RegisteredPair& x, const OptimConfig& cfg) {
  cfg.validate();
  const CompositeObjective objective(x, cfg.weights, cfg.sl_spec, cfg.mef_spec);

  std::vector<double> y;
  switch (cfg.init) {
    case InitMode::kAverage: {
      const GrayImage average = fuse_average(x);
      y.assign(average.pixels().begin(), average.pixels().end());
      break;
    }
    case InitMode::kCt:
      y.assign(x.ct.pixels().begin(), x.ct.pixels().end());
      break;
    case InitMode::kMr:
      y.assign(x.mr.pixels().begin(), x.mr.pixels().end());
      break;
  }

  const size_t n = y.size();
  std::vector<double> gradient(n), m(n, 0.0), v(n, 0.0), step(n), candidate(n), candidate_gradient(n);

  FusionResult result;
  result.initial = objective.evaluate(y, gradient);
  check_finite(result.initial, gradient, 0);
  double previous = result.initial.composite;

  double beta1_power = 1.0;
  double beta2_power = 1.0;
  for (int t = 1; t <= cfg.max_iters; ++t) {
    beta1_power *= cfg.beta1;
    beta2_power *= cfg.beta2;
    for (size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gradient[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gradient[i] * gradient[i];
      const double m_hat = m[i] / (1.0 - beta1_power);
      const double v_hat = v[i] / (1.0 - beta2_power);
      step[i] = cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }

    LossReport report;
    bool accepted = false;
    double scale = 1.0;
    for (int attempt = 0; attempt <= kMaxStepHalvings; ++attempt, scale *= 0.5) {
      for (size_t i = 0; i < n; ++i) candidate[i] = std::clamp(y[i] - scale * step[i], 0.0, 1.0);
      report = objective.evaluate(candidate, candidate_gradient);
      check_finite(report, candidate_gradient, t);
      if (report.composite <= previous) {
        accepted = true;
        break;
      }
    }

    if (accepted) {
      y.swap(candidate);
      gradient.swap(candidate_gradient);
    } else {
      // No descent along the projected step at any tested length.
      report = objective.evaluate(y);
    }
    result.loss_trace.push_back(report);
    result.iterations_run = t;
    const double delta = std::abs(report.composite - previous);
    previous = report.composite;
    if (delta < cfg.tol) {
      result.converged = true;
      break;
    }
  }

  result.fused = GrayImage::clamped(x.width(), x.height(), std::move(y));
  return result;
}

}  // namespace fuselens
