#include "fuselens/pyramid.hpp"

#include <array>

namespace fuselens::pyramid {

namespace {

constexpr std::array<double, 5> kTaps = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace

Plane blur(const Plane& src) {
  const int w = src.width;
  const int h = src.height;
  Plane tmp(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * src.at(r, reflect(c + k, w));
      tmp.at(r, c) = acc;
    }
  }
  Plane out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * tmp.at(reflect(r + k, h), c);
      out.at(r, c) = acc;
    }
  }
  return out;
}

Plane reduce(const Plane& src) {
  const Plane blurred = blur(src);
  Plane out((src.width + 1) / 2, (src.height + 1) / 2);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) out.at(r, c) = blurred.at(2 * r, 2 * c);
  }
  return out;
}

Plane expand(const Plane& src, int width, int height) {
  Plane up(width, height);
  for (int r = 0; r < src.height && 2 * r < height; ++r) {
    for (int c = 0; c < src.width && 2 * c < width; ++c) up.at(r * 2, c * 2) = 4.0 * src.at(r, c);
  }
  return blur(up);
}

std::vector<Plane> laplacian(const Plane& image, int levels) {
  std::vector<Plane> gaussian{image};
  for (int l = 1; l < levels; ++l) gaussian.push_back(reduce(gaussian.back()));

  std::vector<Plane> bands;
  for (int l = 0; l + 1 < levels; ++l) {
    Plane band = gaussian[l];
    const Plane up = expand(gaussian[l + 1], band.width, band.height);
    for (size_t i = 0; i < band.data.size(); ++i) band.data[i] -= up.data[i];
    bands.push_back(std::move(band));
  }
  bands.push_back(gaussian.back());
  return bands;
}

Plane collapse(const std::vector<Plane>& bands) {
  Plane current = bands.back();
  for (size_t l = bands.size() - 1; l-- > 0;) {
    Plane next = expand(current, bands[l].width, bands[l].height);
    for (size_t i = 0; i < next.data.size(); ++i) next.data[i] += bands[l].data[i];
    current = std::move(next);
  }
  return current;
}

}  // namespace fuselens::pyramid
