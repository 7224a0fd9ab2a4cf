#include "lottery/rng.hpp"

#include <bit>
#include <stdexcept>

namespace lottery {

namespace {

// FNV-1a over the seed bytes (little-endian) followed by the label bytes.
std::uint64_t fnv1a_key(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(seed >> (8 * i)));
  for (char ch : label) mix(static_cast<std::uint8_t>(ch));
  return h;
}

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::string_view label) {
  if (label.empty()) throw std::invalid_argument("Rng: stream label must be nonempty");
  std::uint64_t key = fnv1a_key(seed, label);
  for (auto& word : state_) word = splitmix64(key);
}

std::uint64_t Rng::next_u64() {
  // xoshiro256**
  const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = std::rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open01() {
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

Rng derive_stream(std::uint64_t seed, std::string_view label) {
  return Rng(seed, label);
}

}  // namespace lottery
