#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace lottery {

// Deterministic counter-free generator with named substreams.
//
// The state is seeded by hashing (seed, label), so distinct labels give
// statistically independent streams and the sample sequence for a given
// (seed, label) pair is identical across runs and platforms. Sampling uses
// xoshiro256** over four SplitMix64-expanded words; all arithmetic is
// integer, so streams are bit-reproducible.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view label);

  std::uint64_t next_u64();

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform01();

  // Uniform double strictly inside (0, 1). Used by inverse-CDF sampling
  // where either endpoint would map to a boundary value.
  double uniform_open01();

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

 private:
  std::array<std::uint64_t, 4> state_;
};

// Factory form of the constructor; `label` must be nonempty.
Rng derive_stream(std::uint64_t seed, std::string_view label);

}  // namespace lottery
