#include <cmath>

#include "fuselens/errors.hpp"
#include "fuselens/losses.hpp"

namespace fuselens {

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InputError("loss weights must be non-negative");
}

double reconstruct_loss(const RegisteredPair& x, const RegisteredPair& x_hat) {
  if (!x.ct.same_shape(x_hat.ct)) throw DimensionError("reconstruction shape differs from sources");
  auto distance = [](const GrayImage& a, const GrayImage& b) {
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const double d = a.pixels()[i] - b.pixels()[i];
      sum += d * d;
    }
    return std::sqrt(sum);
  };
  return distance(x_hat.mr, x.mr) + distance(x_hat.ct, x.ct);
}

CompositeObjective::CompositeObjective(const RegisteredPair& x, const LossWeights& weights,
                                       const PatchSpec& sl_spec, const PatchSpec& mef_spec)
    : weights_(weights), semantic_(x, sl_spec), mef_(x, mef_spec) {
  weights.validate();
}

LossReport CompositeObjective::evaluate(std::span<const double> y) const {
  LossReport report;
  report.weights = weights_;
  report.sl = semantic_.value(y);
  report.mef_ssim = mef_.value(y);
  report.composite = weights_.alpha * report.sl + weights_.beta * report.mef_ssim;
  return report;
}

LossReport CompositeObjective::evaluate(std::span<const double> y, std::span<double> gradient) const {
  if (gradient.size() != y.size()) throw DimensionError("gradient buffer shape mismatch");
  std::vector<double> part(y.size());
  LossReport report;
  report.weights = weights_;
  report.sl = semantic_.value_and_gradient(y, part);
  report.mef_ssim = mef_.value_and_gradient(y, gradient);
  for (size_t i = 0; i < gradient.size(); ++i) gradient[i] = weights_.alpha * part[i] + weights_.beta * gradient[i];
  report.composite = weights_.alpha * report.sl + weights_.beta * report.mef_ssim;
  return report;
}

LossReport composite_loss(const RegisteredPair& x, const GrayImage& y, const LossWeights& weights,
                          const PatchSpec& sl_spec, const PatchSpec& mef_spec, const RegisteredPair* x_hat,
                          Plane* gradient) {
  if (!y.same_shape(x.ct)) throw DimensionError("fused image shape differs from sources");
  const CompositeObjective objective(x, weights, sl_spec, mef_spec);
  LossReport report;
  if (gradient) {
    *gradient = Plane(y.width(), y.height());
    report = objective.evaluate(y.pixels(), gradient->data);
  } else {
    report = objective.evaluate(y.pixels());
  }
  if (x_hat) {
    report.reconstruct = reconstruct_loss(x, *x_hat);
    report.composite += *report.reconstruct;
  }
  return report;
}

}  // namespace fuselens
