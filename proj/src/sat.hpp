#pragma once

#include <span>
#include <vector>

namespace fuselens::detail {

/// (height+1) x (width+1) summed-area table over a row-major buffer.
template <typename T, typename In>
std::vector<T> summed_area_table(std::span<const In> values, int width, int height) {
  const size_t stride = static_cast<size_t>(width) + 1;
  std::vector<T> sat(stride * (static_cast<size_t>(height) + 1), T{});
  for (int r = 0; r < height; ++r) {
    T row_sum{};
    for (int c = 0; c < width; ++c) {
      row_sum += static_cast<T>(values[static_cast<size_t>(r) * width + c]);
      sat[(r + 1) * stride + c + 1] = sat[r * stride + c + 1] + row_sum;
    }
  }
  return sat;
}

template <typename T>
T box_sum(const std::vector<T>& sat, int width, int row, int col, int size) {
  const size_t stride = static_cast<size_t>(width) + 1;
  const size_t r0 = row, r1 = row + size, c0 = col, c1 = col + size;
  return sat[r1 * stride + c1] - sat[r0 * stride + c1] - sat[r1 * stride + c0] + sat[r0 * stride + c0];
}

}  // namespace fuselens::detail
