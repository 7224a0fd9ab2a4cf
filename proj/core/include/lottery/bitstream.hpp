#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lottery/coder.hpp"

namespace lottery {

// Little-endian container: magic "LTRY", version byte, header, then four
// byte-aligned sections (psi, z, theta, tau) each with a 32-bit length
// prefix; dense-trained streams append a fifth section holding the coded
// synthesis weights. Sections are independently decodable given the header.
inline constexpr char kMagic[4] = {'L', 'T', 'R', 'Y'};
inline constexpr std::uint8_t kVersion = 1;

enum class CodecMode : std::uint8_t {
  kLottery = 0,
  kModNetOnly = 1,
  kDenseTrained = 2,
};

struct SymbolBounds {
  std::int16_t lo = 0;
  std::int16_t hi = 0;
};

struct BitstreamHeader {
  CodecMode mode = CodecMode::kLottery;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint64_t seed = 0;
  float mask_ratio = 0.0f;
  std::uint16_t modnet_width = 0;   // d
  std::uint16_t arm_context = 0;    // c
  std::uint8_t latent_levels = 0;   // L
  std::uint8_t extra_convs = 0;     // variant flag
  std::uint16_t fourier_phases = 0;
  std::uint16_t fourier_freqs = 0;
  std::vector<SymbolBounds> latent_bounds;  // one per level
  std::uint8_t delta_theta_log2 = 0;        // Delta = 2^-k
  std::uint8_t delta_psi_log2 = 0;
  float stddev_theta = 0.0f;
  float stddev_psi = 0.0f;
  SymbolBounds theta_bounds;
  SymbolBounds psi_bounds;
  std::uint32_t active_count = 0;
  // Dense-trained extras (present on the wire only for that mode).
  std::uint8_t delta_w_log2 = 0;
  float stddev_w = 0.0f;
  SymbolBounds w_bounds;

  std::size_t serialized_size() const;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> psi;
  std::vector<std::uint8_t> z;
  std::vector<std::uint8_t> theta;
  std::vector<std::uint8_t> tau;
  std::vector<std::uint8_t> w;  // dense-trained only

  std::size_t total_bytes() const;
};

std::vector<std::uint8_t> serialize(const Bitstream& stream);

// Throws DecodeError on bad magic/version, truncation, or length mismatch.
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);

}  // namespace lottery
