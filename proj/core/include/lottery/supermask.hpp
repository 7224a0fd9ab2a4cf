#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lottery/fourier_init.hpp"
#include "lottery/grid.hpp"

namespace lottery {

// The masked synthesis stack over pixel coordinates. Four masked linear
// layers (no biases) with output widths {32, 24, 16, 3}; hidden activations
// are GELU, the last layer is tanh mapped to [0,1] via (y+1)/2. Layer
// inputs are the previous features concatenated after the rewound
// modulation channels.
struct SuperMaskConfig {
  int modnet_width = 32;  // d, width of the deepest modulation source
  int extra_convs = 0;    // improved variant adds one 3-channel modulation
  double mask_ratio = 0.3;

  static constexpr int kLayers = 4;
  static constexpr std::array<int, kLayers> kOutDims{32, 24, 16, 3};

  std::array<int, kLayers> in_dims() const;
  // Modulation channel count spliced into the input of layer i (1-based,
  // layers 2..4 are modulated).
  int mod_channels(int index) const;
};

struct SuperMaskNet {
  SuperMaskConfig cfg;
  FourierConfig fourier;
  std::vector<LayerWeights> layers;             // kLayers entries
  std::vector<std::vector<std::uint8_t>> mask;  // row-major per layer
  std::vector<Matrix> masked;                   // tau ⊙ W0, kept in sync

  std::int64_t total_weights() const;
  std::int64_t active_count() const;
};

// Builds W0 and scores from the shared seed. The decoder calls this with
// the header seed and obtains byte-identical weights.
SuperMaskNet build_supermask_net(const SuperMaskConfig& cfg, const FourierConfig& fourier,
                                 std::uint64_t seed);

// Global top-k mask: exactly round(ratio * N) ones across all layers, ties
// at the threshold resolved by (layer, row-major position). Invariant under
// strictly increasing transforms of the scores.
std::vector<std::vector<std::uint8_t>> compute_global_topk(
    const std::vector<std::span<const double>>& scores, double ratio);

// Recomputes the mask from the current scores and refreshes the masked
// weight matrices.
void refresh_mask(SuperMaskNet& net);

// Installs an externally decoded mask (decoder path; scores untouched).
void install_mask(SuperMaskNet& net, std::vector<std::vector<std::uint8_t>> mask);

// Plain gradient step on the scores: p <- p - lr * g.
void update_scores(SuperMaskNet& net, const std::vector<std::vector<double>>& score_grads,
                   double lr);

// Coordinate normalization to [-1, 1]: 2r/(n-1) - 1 (0 when n == 1).
double normalized_coord(int r, int n);

// Reusable per-pixel workspace: layer inputs, preactivations (with the
// activation derivative saved by the forward pass) and backward scratch.
struct SynthTape {
  std::array<std::vector<double>, SuperMaskConfig::kLayers> input;
  std::array<std::vector<double>, SuperMaskConfig::kLayers> pre;
  std::array<std::vector<double>, SuperMaskConfig::kLayers> act_deriv;
  std::array<double, 3> rgb{};  // in [0,1]
  std::array<std::vector<double>, SuperMaskConfig::kLayers> d_pre;
  std::array<std::vector<double>, SuperMaskConfig::kLayers> d_input;
};

void init_tape(const SuperMaskNet& net, SynthTape& tape);

// Forward for one pixel. mods[i] supplies the modulation channels of layer
// i+2 (i = 0..2), gathered by the caller; sizes must match mod_channels.
void synth_forward_pixel(const SuperMaskNet& net, double coord_row, double coord_col,
                         const std::array<std::span<const double>, 3>& mods, SynthTape& tape);

// Backward for one pixel from d(loss)/d(rgb).
//
// d_mods receives the gradient w.r.t. each modulation span (overwritten).
// score_grads accumulates the straight-through estimate
//   sigma_kj += d_pre_k * w0_kj * input_j
// over every weight, masked or not (the mask indicator is ignored).
// weight_grads, when non-null, accumulates exact gradients for trainable
// dense weights (ablation path) over active weights only.
void synth_backward_pixel(const SuperMaskNet& net, SynthTape& tape,
                          std::span<const double> d_rgb,
                          const std::array<std::span<double>, 3>& d_mods,
                          std::vector<std::vector<double>>* score_grads,
                          std::vector<std::vector<double>>* weight_grads);

}  // namespace lottery
