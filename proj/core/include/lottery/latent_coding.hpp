#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lottery/arm.hpp"
#include "lottery/coder.hpp"

namespace lottery {

// Sequential ARM-driven coding of the hard-rounded latents: levels in
// order, raster order within a level, one quantized CDF per element from
// the causal context. level_bounds are the per-grid symbol ranges carried
// in the header.
struct LatentCode {
  std::vector<std::uint8_t> bytes;
  double model_bits = 0.0;
};

LatentCode encode_latents(const LatentPyramid& zhat, const ArmParams& arm,
                          std::span<const std::pair<int, int>> offsets,
                          std::span<const std::pair<int, int>> level_bounds);

LatentPyramid decode_latents(std::span<const std::uint8_t> bytes, int height, int width,
                             int levels, const ArmParams& arm,
                             std::span<const std::pair<int, int>> offsets,
                             std::span<const std::pair<int, int>> level_bounds);

// Predicted section size under the quantized CDF tables for a candidate
// ARM; used by the quantization-step search.
double predicted_latent_bits(const LatentPyramid& zhat, const ArmParams& arm,
                             std::span<const std::pair<int, int>> offsets,
                             std::span<const std::pair<int, int>> level_bounds);

// Per-level (lo, hi) of the integer latents, for the header.
std::vector<std::pair<int, int>> latent_bounds(const LatentPyramid& zhat);

}  // namespace lottery
