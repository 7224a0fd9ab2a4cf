#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lottery/model.hpp"

namespace lottery {

struct EncoderConfig {
  double lambda = 1e-3;
  double mask_ratio = 0.3;
  int modnet_width = 32;  // d
  int arm_context = 16;   // c
  int extra_convs = 0;
  int latent_levels = 7;
  long stage1_steps = 100000;
  long stage2_steps = 10000;
  std::uint64_t seed = 0;
  long eval_interval = 100;
  bool force_plain_sgd = false;  // plain SGD instead of Adam for z/theta/psi
  FourierConfig fourier{};

  static constexpr std::array<double, 6> kDefaultLambdas{2e-2, 1e-2, 5e-3, 1e-3, 5e-4, 2e-4};
};

struct RDRecord {
  int height = 0;
  int width = 0;
  CodecMode mode = CodecMode::kLottery;
  double lambda = 0.0;
  double mask_ratio = 0.0;
  std::uint64_t seed = 0;
  long steps1 = 0;
  long steps2 = 0;
  int modnet_width = 0;
  int arm_context = 0;
  int extra_convs = 0;
  int latent_levels = 0;

  double bpp_total = 0.0;
  double bpp_z = 0.0;
  double bpp_tau = 0.0;
  double bpp_theta = 0.0;
  double bpp_psi = 0.0;
  double bpp_w = 0.0;       // dense-trained mode only
  double bpp_header = 0.0;  // fixed header plus section length prefixes

  double psnr_db = 0.0;
  double psnr_unquantized_db = 0.0;  // best model before network quantization
  double mse = 0.0;
  double rd_cost = 0.0;  // mse + lambda * bpp_total
  double macs_lower = 0.0;
  double macs_upper = 0.0;
  double model_bits_total = 0.0;  // -sum log2 P over all coded symbols
  double header_bits = 0.0;
  double wall_seconds = 0.0;
};

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  RDRecord record;
  PixelGrid reconstruction;  // identical to the decoder's output
};

// Thrown when the optimization produces a non-finite loss; the message
// carries the diagnostic state (stage, step, learning rate, loss terms).
struct EncodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two-stage per-image optimization of {z, P, theta, psi}, best-model
// tracking on the hard-rounded RD cost, quantization-step search, bitstream
// emission. The recorded PSNR is measured on the exact reconstruction the
// decoder will produce.
EncodeResult encode_image(const PixelGrid& image, const EncoderConfig& cfg);

// Hypothesis-verification modes: kModNetOnly drops the masked stack,
// kDenseTrained trains the same synthesis architecture densely and pays for
// its quantized weights in the bitstream.
EncodeResult ablation_encode(const PixelGrid& image, const EncoderConfig& cfg, CodecMode mode);

// Adaptive-moment update (decay 0.9/0.999, epsilon 1e-8), bias-corrected.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

}  // namespace lottery
