#pragma once

#include <cstdint>
#include <span>

#include "lottery/model.hpp"

namespace lottery {

struct DecodeResult {
  PixelGrid image;
  // Measured decoder multiplies per pixel: equals the complexity lower
  // bound when masked multiplies are skipped, the upper bound otherwise.
  double macs_per_pixel = 0.0;
  double synth_macs_per_pixel = 0.0;
};

// Algorithm: rebuild W0 from the header seed, decode tau and configure the
// subnetwork, decode psi, sequentially decode z under the ARM, decode
// theta, then synthesize. A pure function of the bytes; throws DecodeError
// on malformed input and never emits a partial image.
DecodeResult decode_image(std::span<const std::uint8_t> bytes, bool sparse_synthesis = false);

}  // namespace lottery
