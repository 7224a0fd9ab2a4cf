#pragma once

#include <cstdint>

#include "lottery/grid.hpp"

namespace lottery {

// Procedural test crops with natural-image statistics: a smooth color
// gradient, soft blobs, oriented sinusoid texture patches and a couple of
// hard edges. Deterministic in the seed; values in [0, 1].
PixelGrid make_test_image(int height, int width, std::uint64_t seed);

// Flat mid-gray image.
PixelGrid make_constant_image(int height, int width, double value);

}  // namespace lottery
