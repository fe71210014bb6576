#pragma once

#include "fuselens/image.hpp"

namespace fuselens {

struct MetricReport {
  double q_mi = 0.0;
  double q_abf = 0.0;
  double ssim_ct = 0.0;
  double ssim_mr = 0.0;
  double sl = 0.0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean local SSIM over 11x11 Gaussian windows (sigma 1.5), stride 1, valid
/// positions only; K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim_index(const GrayImage& a, const GrayImage& b);

/// Normalized mutual information over 256 uniform bins:
///   I(ct;y)/(H(ct)+H(y)) + I(mr;y)/(H(mr)+H(y)).
/// A perfect copy of both sources scores 1.
double q_mi(const RegisteredPair& x, const GrayImage& y);

/// Xydeas-Petrovic edge preservation with 3x3 Sobel gradients on interior
/// pixels. All-flat sources yield 0.
double q_abf(const RegisteredPair& x, const GrayImage& y);

/// Semantic loss with evaluation parameters: 3x3 patches, stride 1,
/// background threshold 0.01.
double sl_metric(const RegisteredPair& x, const GrayImage& y);

MetricReport evaluate_all(const RegisteredPair& x, const GrayImage& y);

}  // namespace fuselens
