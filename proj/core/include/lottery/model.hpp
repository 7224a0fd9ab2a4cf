#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lottery/arm.hpp"
#include "lottery/bitstream.hpp"
#include "lottery/fourier_init.hpp"
#include "lottery/grid.hpp"
#include "lottery/modnet.hpp"
#include "lottery/supermask.hpp"

namespace lottery {

struct CodecConfig {
  int height = 0;
  int width = 0;
  std::uint64_t seed = 0;
  CodecMode mode = CodecMode::kLottery;
  int latent_levels = 7;
  int modnet_width = 32;  // d
  int arm_context = 16;   // c
  int extra_convs = 0;    // improved-variant flag
  double mask_ratio = 0.3;
  FourierConfig fourier{};
};

// Everything both sides of the codec share: the (re)buildable random
// network, the modulation and entropy networks, and the training latents.
struct CodecModel {
  CodecConfig cfg;
  SuperMaskNet synth;  // absent computation-wise in modnet-only mode
  ModNetParams modnet;
  ArmParams arm;
  LatentPyramid latents;  // z, continuous during training
  std::vector<std::pair<int, int>> ctx_offsets;

  bool has_synth() const { return cfg.mode != CodecMode::kModNetOnly; }
};

CodecModel build_model(const CodecConfig& cfg);

struct ReconstructionStats {
  std::int64_t synth_mults = 0;
  std::int64_t modnet_mults = 0;
  std::int64_t upsample_mults = 0;
};

// Deterministic synthesis from quantized (or training) latents. The sparse
// path skips masked multiplies and realizes the lower complexity bound;
// both paths produce bit-identical pixels. This is the single code path
// behind both the encoder's recorded reconstruction and the decoder.
PixelGrid reconstruct(const CodecModel& model, const LatentPyramid& zhat,
                      bool sparse_synthesis = false, ReconstructionStats* stats = nullptr);

// Training-time latents: value fed to the pipeline plus d(zhat)/dz.
struct LatentState {
  LatentPyramid zhat;
  LatentPyramid chain;
};

// Stage I: zhat = soft_round(z, T) + Kumaraswamy noise (fresh per step from
// a per-step substream); Stage II: zhat = round(z) with the T=1e-4
// soft-round derivative as the straight-through surrogate.
LatentState stage1_latents(const LatentPyramid& z, double temperature, double noise_a,
                           std::uint64_t seed, long step);
LatentState stage2_latents(const LatentPyramid& z);

struct Gradients {
  LatentPyramid z;
  ModNetGrads modnet;
  ArmGrads arm;
  std::vector<std::vector<double>> scores;   // straight-through estimates
  std::vector<std::vector<double>> weights;  // dense-trained mode only

  explicit Gradients(const CodecModel& model);
};

struct LossBreakdown {
  double mse = 0.0;
  double rate_bits = 0.0;  // latent rate under the continuous model
  double loss = 0.0;       // mse + lambda * rate_bits / (H*W)
};

// Forward-only evaluation at given latents (used for best-model tracking).
LossBreakdown evaluate_loss(const CodecModel& model, const PixelGrid& image,
                            const LatentPyramid& zhat, double lambda);

// One fused forward/backward pass: distortion through ModNet + SuperMask,
// rate through the ARM (gradients flow into each element's own likelihood
// and into every context it appears in). All reductions are fixed-order.
LossBreakdown loss_and_gradients(const CodecModel& model, const PixelGrid& image,
                                 const LatentState& state, double lambda, Gradients& grads);

// Hard-rounded integer snapshot of the current latents.
LatentPyramid rounded_latents(const LatentPyramid& z);

}  // namespace lottery
