#pragma once

#include "lottery/grid.hpp"
#include "lottery/rng.hpp"

namespace lottery {

// Fourier reparameterization of the frozen synthesis weights: P phases and
// 2F frequencies give M = 2*F*P cosine basis rows. The frequency vector is
// {1/F, ..., 1} followed by {1, ..., F} (the duplicate 1 is kept, as
// defined), enumerated phase-major: for each phase, all 2F frequencies.
struct FourierConfig {
  int phase_count = 32;  // P
  int freq_count = 64;   // F

  int basis_count() const { return 2 * freq_count * phase_count; }
};

// Builds a frozen out_dim x in_dim weight matrix W0 = Lambda * B.
//
// Positions a_1..a_in are drawn uniformly from [-pi, pi]; basis entry
// b[m][n] = cos(w_m * a_n + phi_m); each coefficient of row m is drawn
// uniformly from +-sqrt(6 / (M * sum_n b[m][n]^2)). A basis row with zero
// energy triggers a full position resample (at most 10 attempts).
Matrix build_fourier_weights(int out_dim, int in_dim, const FourierConfig& cfg, Rng& rng);

// Kaiming-uniform scores: entries uniform in +-sqrt(6 / in_dim).
Matrix init_scores(int out_dim, int in_dim, Rng& rng);

// One masked linear layer: frozen weights plus their learnable scores.
struct LayerWeights {
  int out_dim = 0;
  int in_dim = 0;
  Matrix w0;      // frozen after construction
  Matrix scores;  // same shape as w0

  std::size_t weight_count() const { return w0.size(); }
};

LayerWeights build_layer(int out_dim, int in_dim, const FourierConfig& cfg,
                         std::uint64_t seed, int layer_index);

}  // namespace lottery
