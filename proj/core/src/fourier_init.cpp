#include "lottery/fourier_init.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace lottery {

Matrix build_fourier_weights(int out_dim, int in_dim, const FourierConfig& cfg, Rng& rng) {
  if (out_dim < 1 || in_dim < 1)
    throw std::invalid_argument("build_fourier_weights: dims must be >= 1");
  if (cfg.phase_count < 1 || cfg.freq_count < 1)
    throw std::invalid_argument("build_fourier_weights: invalid Fourier config");

  const int num_phases = cfg.phase_count;
  const int num_freqs = 2 * cfg.freq_count;
  const int basis_rows = cfg.basis_count();
  constexpr double kPi = std::numbers::pi;

  Matrix basis(basis_rows, in_dim);
  std::vector<double> row_energy(basis_rows, 0.0);

  for (int attempt = 0;; ++attempt) {
    if (attempt == 10)
      throw std::runtime_error("build_fourier_weights: degenerate basis after 10 position resamples");

    std::vector<double> positions(in_dim);
    for (double& a : positions) a = rng.uniform(-kPi, kPi);

    bool degenerate = false;
    for (int p = 0; p < num_phases && !degenerate; ++p) {
      const double phase = 2.0 * kPi * p / num_phases;
      for (int f = 0; f < num_freqs; ++f) {
        const int m = p * num_freqs + f;
        const double freq = f < cfg.freq_count
                                ? static_cast<double>(f + 1) / cfg.freq_count
                                : static_cast<double>(f - cfg.freq_count + 1);
        double energy = 0.0;
        for (int n = 0; n < in_dim; ++n) {
          const double b = std::cos(freq * positions[n] + phase);
          basis.at(m, n) = b;
          energy += b * b;
        }
        row_energy[m] = energy;
        if (energy == 0.0) {
          degenerate = true;
          break;
        }
      }
    }
    if (!degenerate) break;
  }

  Matrix w0(out_dim, in_dim);
  // Coefficients are consumed row-major over (output, basis row); the order
  // is part of the reproducibility contract between encoder and decoder.
  std::vector<double> coeff_row(basis_rows);
  for (int k = 0; k < out_dim; ++k) {
    for (int m = 0; m < basis_rows; ++m) {
      const double bound = std::sqrt(6.0 / (static_cast<double>(basis_rows) * row_energy[m]));
      coeff_row[m] = rng.uniform(-bound, bound);
    }
    for (int n = 0; n < in_dim; ++n) {
      double acc = 0.0;
      for (int m = 0; m < basis_rows; ++m) acc += coeff_row[m] * basis.at(m, n);
      w0.at(k, n) = acc;
    }
  }
  return w0;
}

Matrix init_scores(int out_dim, int in_dim, Rng& rng) {
  if (out_dim < 1 || in_dim < 1) throw std::invalid_argument("init_scores: dims must be >= 1");
  const double bound = std::sqrt(6.0 / in_dim);
  Matrix scores(out_dim, in_dim);
  for (double& s : scores.a) s = rng.uniform(-bound, bound);
  return scores;
}

LayerWeights build_layer(int out_dim, int in_dim, const FourierConfig& cfg,
                         std::uint64_t seed, int layer_index) {
  LayerWeights layer;
  layer.out_dim = out_dim;
  layer.in_dim = in_dim;
  Rng w_rng = derive_stream(seed, "fourier/layer" + std::to_string(layer_index));
  layer.w0 = build_fourier_weights(out_dim, in_dim, cfg, w_rng);
  Rng s_rng = derive_stream(seed, "scores/layer" + std::to_string(layer_index));
  layer.scores = init_scores(out_dim, in_dim, s_rng);
  return layer;
}

}  // namespace lottery
