#pragma once

#include <vector>

#include "fuselens/image.hpp"

namespace fuselens::pyramid {

/// 5-tap binomial blur (1 4 6 4 1)/16 with reflect-101 borders.
Plane blur(const Plane& src);

/// Blur then keep even rows/columns; output is ceil(w/2) x ceil(h/2).
Plane reduce(const Plane& src);

/// Zero-insertion upsampling to width x height followed by 4x blur.
Plane expand(const Plane& src, int width, int height);

/// levels - 1 band-pass planes followed by the coarse residual.
std::vector<Plane> laplacian(const Plane& image, int levels);

/// Inverse of laplacian().
Plane collapse(const std::vector<Plane>& bands);

}  // namespace fuselens::pyramid
