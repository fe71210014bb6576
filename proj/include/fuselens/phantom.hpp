#pragma once

#include <cstdint>
#include <vector>

#include "fuselens/image.hpp"

namespace fuselens {

/// Synthetic head-like registered pair with opposing brightness semantics:
/// bone is bright in ct and dark in mr, fluid the reverse.
struct Phantom {
  RegisteredPair pair;
  /// Per-pixel tissue labels, see PhantomTissue.
  std::vector<uint8_t> labels;
};

enum PhantomTissue : uint8_t { kBackground = 0, kBone = 1, kSoftTissue = 2, kFluid = 3 };

/// Deterministic in (size, seed). Requires size >= 32.
Phantom generate_phantom(int size, uint64_t seed);

}  // namespace fuselens
