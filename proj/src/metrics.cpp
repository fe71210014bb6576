#include "fuselens/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "fuselens/errors.hpp"
#include "fuselens/losses.hpp"

namespace fuselens {

namespace {

constexpr int kBins = 256;

void require_same_shape(const GrayImage& a, const GrayImage& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": image shapes differ");
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> taps{};
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable Gaussian filter over valid window positions.
Plane filter_valid(const std::vector<double>& src, int width, int height) {
  static const auto taps = gaussian_taps();
  const int out_w = width - kSsimWindow + 1;
  const int out_h = height - kSsimWindow + 1;
  std::vector<double> rows(static_cast<size_t>(out_w) * height);
  for (int r = 0; r < height; ++r) {
    const double* in = src.data() + static_cast<size_t>(r) * width;
    for (int c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * in[c + k];
      rows[static_cast<size_t>(r) * out_w + c] = acc;
    }
  }
  Plane out(out_w, out_h);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * rows[static_cast<size_t>(r + k) * out_w + c];
      out.at(r, c) = acc;
    }
  }
  return out;
}

int bin_of(double v) { return std::min(kBins - 1, static_cast<int>(v * kBins)); }

double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

double normalized_mi_term(const GrayImage& source, const GrayImage& fused) {
  const size_t n = source.size();
  std::vector<double> joint(static_cast<size_t>(kBins) * kBins, 0.0);
  std::vector<double> hs(kBins, 0.0), hf(kBins, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const int a = bin_of(source.pixels()[i]);
    const int b = bin_of(fused.pixels()[i]);
    joint[static_cast<size_t>(a) * kBins + b] += 1.0;
    hs[a] += 1.0;
    hf[b] += 1.0;
  }
  const double total = static_cast<double>(n);
  const double h_source = entropy(hs, total);
  const double h_fused = entropy(hf, total);
  if (h_source + h_fused == 0.0) return source == fused ? 0.5 : 0.0;
  const double mutual = h_source + h_fused - entropy(joint, total);
  return mutual / (h_source + h_fused);
}

struct EdgeField {
  std::vector<double> strength;
  std::vector<double> orientation;
};

// Sobel strength and orientation on the (w-2) x (h-2) interior.
EdgeField sobel(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  EdgeField f;
  f.strength.reserve(static_cast<size_t>(w - 2) * (h - 2));
  f.orientation.reserve(f.strength.capacity());
  for (int r = 1; r < h - 1; ++r) {
    for (int c = 1; c < w - 1; ++c) {
      const double gx = (img.at(r - 1, c + 1) + 2.0 * img.at(r, c + 1) + img.at(r + 1, c + 1)) -
                        (img.at(r - 1, c - 1) + 2.0 * img.at(r, c - 1) + img.at(r + 1, c - 1));
      const double gy = (img.at(r + 1, c - 1) + 2.0 * img.at(r + 1, c) + img.at(r + 1, c + 1)) -
                        (img.at(r - 1, c - 1) + 2.0 * img.at(r - 1, c) + img.at(r - 1, c + 1));
      f.strength.push_back(std::sqrt(gx * gx + gy * gy));
      double alpha = 0.0;
      if (gx != 0.0) {
        alpha = std::atan(gy / gx);
      } else if (gy != 0.0) {
        alpha = std::numbers::pi / 2.0;
      }
      f.orientation.push_back(alpha);
    }
  }
  return f;
}

// Edge preservation of source edges in the fused image, per pixel.
double preservation(double g_source, double a_source, double g_fused, double a_fused) {
  constexpr double kGammaG = 0.9994, kKappaG = -15.0, kSigmaG = 0.5;
  constexpr double kGammaA = 0.9879, kKappaA = -22.0, kSigmaA = 0.8;
  double strength_ratio = 1.0;
  if (g_source != g_fused) {
    strength_ratio = g_source > g_fused ? g_fused / g_source : g_source / g_fused;
  }
  const double orientation_agreement = 1.0 - std::abs(a_source - a_fused) / (std::numbers::pi / 2.0);
  const double q_g = kGammaG / (1.0 + std::exp(kKappaG * (strength_ratio - kSigmaG)));
  const double q_a = kGammaA / (1.0 + std::exp(kKappaA * (orientation_agreement - kSigmaA)));
  return q_g * q_a;
}

}  // namespace

double ssim_index(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b, "ssim_index");
  const int w = a.width();
  const int h = a.height();
  if (w < kSsimWindow || h < kSsimWindow) {
    throw DimensionError("ssim_index: image smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;

  const size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  for (size_t i = 0; i < n; ++i) {
    aa[i] = pa[i] * pa[i];
    bb[i] = pb[i] * pb[i];
    ab[i] = pa[i] * pb[i];
  }
  const Plane mu_a = filter_valid({pa.begin(), pa.end()}, w, h);
  const Plane mu_b = filter_valid({pb.begin(), pb.end()}, w, h);
  const Plane e_aa = filter_valid(aa, w, h);
  const Plane e_bb = filter_valid(bb, w, h);
  const Plane e_ab = filter_valid(ab, w, h);

  double sum = 0.0;
  for (size_t i = 0; i < mu_a.data.size(); ++i) {
    const double ma = mu_a.data[i];
    const double mb = mu_b.data[i];
    const double var_a = e_aa.data[i] - ma * ma;
    const double var_b = e_bb.data[i] - mb * mb;
    const double cov = e_ab.data[i] - ma * mb;
    sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return sum / static_cast<double>(mu_a.data.size());
}

double q_mi(const RegisteredPair& x, const GrayImage& y) {
  require_same_shape(x.ct, y, "q_mi");
  return normalized_mi_term(x.ct, y) + normalized_mi_term(x.mr, y);
}

double q_abf(const RegisteredPair& x, const GrayImage& y) {
  require_same_shape(x.ct, y, "q_abf");
  if (y.width() < 3 || y.height() < 3) throw DimensionError("q_abf: images must be at least 3x3");
  const EdgeField ea = sobel(x.ct);
  const EdgeField eb = sobel(x.mr);
  const EdgeField ef = sobel(y);

  double numer = 0.0;
  double denom = 0.0;
  for (size_t i = 0; i < ef.strength.size(); ++i) {
    const double wa = ea.strength[i];
    const double wb = eb.strength[i];
    const double qa = preservation(ea.strength[i], ea.orientation[i], ef.strength[i], ef.orientation[i]);
    const double qb = preservation(eb.strength[i], eb.orientation[i], ef.strength[i], ef.orientation[i]);
    numer += qa * wa + qb * wb;
    denom += wa + wb;
  }
  if (denom == 0.0) return 0.0;
  return std::clamp(numer / denom, 0.0, 1.0);
}

double sl_metric(const RegisteredPair& x, const GrayImage& y) {
  return semantic_loss(x, y, PatchSpec{3, 1, 0.01});
}

MetricReport evaluate_all(const RegisteredPair& x, const GrayImage& y) {
  MetricReport report;
  report.q_mi = q_mi(x, y);
  report.q_abf = q_abf(x, y);
  report.ssim_ct = ssim_index(x.ct, y);
  report.ssim_mr = ssim_index(x.mr, y);
  report.sl = sl_metric(x, y);
  return report;
}

}  // namespace fuselens
