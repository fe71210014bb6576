#include "fuselens/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fuselens/errors.hpp"

namespace fuselens {

namespace {

struct Ellipse {
  double cx, cy, rx, ry;

  double radius(double x, double y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return std::sqrt(dx * dx + dy * dy);
  }
};

// Mean intensities per tissue, indexed by PhantomTissue.
constexpr double kCtLevel[] = {0.0, 0.92, 0.40, 0.10};
constexpr double kMrLevel[] = {0.0, 0.08, 0.50, 0.90};
constexpr double kNoiseSigma = 0.015;

}  // namespace

Phantom generate_phantom(int size, uint64_t seed) {
  if (size < 32) throw InputError("phantom size must be >= 32");
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double s = size;
  const Ellipse head{s / 2 + jitter(-0.02, 0.02) * s, s / 2 + jitter(-0.02, 0.02) * s, jitter(0.38, 0.44) * s,
                     jitter(0.32, 0.40) * s};
  const double ring = jitter(0.12, 0.16);  // skull thickness as a fraction of the radius

  std::vector<Ellipse> cavities;
  const int cavity_count = 2 + static_cast<int>(unit(rng) * 3.0);
  for (int k = 0; k < cavity_count; ++k) {
    const double angle = jitter(0.0, 2.0 * std::numbers::pi);
    const double dist = jitter(0.0, 0.45);
    const double r = jitter(0.07, 0.13) * s;
    cavities.push_back({head.cx + dist * head.rx * std::cos(angle), head.cy + dist * head.ry * std::sin(angle), r,
                        r * jitter(0.7, 1.0)});
  }

  const size_t count = static_cast<size_t>(size) * size;
  std::vector<uint8_t> labels(count, kBackground);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double px = c + 0.5;
      const double py = r + 0.5;
      const double rho = head.radius(px, py);
      uint8_t label = kBackground;
      if (rho <= 1.0) {
        label = rho > 1.0 - ring ? kBone : kSoftTissue;
        if (label == kSoftTissue) {
          for (const Ellipse& cav : cavities) {
            if (cav.radius(px, py) <= 1.0) label = kFluid;
          }
        }
      }
      labels[static_cast<size_t>(r) * size + c] = label;
    }
  }

  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  // Slow soft-tissue shading so the two modalities are not piecewise constant.
  const double shade_phase = jitter(0.0, 2.0 * std::numbers::pi);
  std::vector<double> ct(count, 0.0), mr(count, 0.0);
  for (size_t i = 0; i < count; ++i) {
    const uint8_t label = labels[i];
    if (label == kBackground) continue;
    const double col = static_cast<double>(i % size) / s;
    const double row = static_cast<double>(i / size) / s;
    const double shade = label == kSoftTissue ? 0.05 * std::sin(6.0 * col + 4.0 * row + shade_phase) : 0.0;
    ct[i] = kCtLevel[label] + shade + noise(rng);
    mr[i] = kMrLevel[label] - shade + noise(rng);
  }
  return Phantom{RegisteredPair(GrayImage::clamped(size, size, std::move(ct)), GrayImage::clamped(size, size, std::move(mr))),
                 std::move(labels)};
}

}  // namespace fuselens
