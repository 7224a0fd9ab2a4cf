#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lottery/grid.hpp"
#include "lottery/modnet.hpp"
#include "lottery/rng.hpp"

namespace lottery {

// Causal context template: c offsets (dy, dx) with dy < 0, or dy == 0 and
// dx < 0. Offsets are the first c entries of the window dy in [-3, 0],
// dx in [-3, 3] sorted by (dy^2 + dx^2, -dy, -dx) ascending; if c exceeds
// that window (c = 32 with 24 causal offsets available) the window radius
// grows and the same sort rule fills the remainder.
std::vector<std::pair<int, int>> build_context_template(int context_size);

// Values at pos+offset in template order, 0 where the offset leaves the
// grid. Contexts never cross pyramid levels.
void extract_context(std::span<const double> grid, int height, int width, int y, int x,
                     std::span<const std::pair<int, int>> offsets, std::span<double> out);

// Three layers (c x c) -> GELU -> (c x c) -> GELU -> (c x 2) with biases.
// Output row 0 is mu, row 1 the raw log-scale; the Laplace scale is
// clip(exp(raw - 4), 1e-2, 150).
struct ArmParams {
  int context_size = 16;
  Matrix w1, w2, w3;  // c x c, c x c, 2 x c
  std::vector<double> b1, b2, b3;

  std::size_t param_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

ArmParams init_arm(int context_size, std::uint64_t seed);

struct ArmEval {
  double mu = 0.0;
  double scale = 0.0;      // clipped Laplace scale b
  double raw_scale = 0.0;  // pre-clip network output
};

// Forward-only evaluation; throws on non-finite network output.
ArmEval arm_eval(std::span<const double> ctx, const ArmParams& params);

// Per-element workspace for the backward pass.
struct ArmTape {
  std::vector<double> ctx, pre1, h1, pre2, h2;
  std::vector<double> deriv1, deriv2;  // gelu' at the hidden preactivations
  double mu = 0.0, raw_scale = 0.0, scale = 0.0;
  std::vector<double> d_h2, d_pre2, d_h1, d_pre1;  // backward scratch
};

void init_arm_tape(const ArmParams& params, ArmTape& tape);

// with_derivs fills deriv1/deriv2 for a following arm_backward; coding-only
// callers skip that cost.
ArmEval arm_eval_tape(std::span<const double> ctx, const ArmParams& params, ArmTape& tape,
                      bool with_derivs = false);

struct ArmGrads {
  Matrix w1, w2, w3;
  std::vector<double> b1, b2, b3;

  explicit ArmGrads(const ArmParams& params);
  void add(const ArmGrads& other);
  std::vector<double> flatten() const;
};

// Backprop (d_mu, d_scale) through the MLP; d_scale is the gradient w.r.t.
// the clipped scale (zero flows through an active clip). d_ctx is
// overwritten, parameter gradients accumulate.
void arm_backward(const ArmParams& params, ArmTape& tape, double d_mu, double d_scale,
                  std::span<double> d_ctx, ArmGrads& grads);

// Integrated Laplace over the unit bin [z-0.5, z+0.5]:
//   P = F(z+0.5; mu, b) - F(z-0.5; mu, b),
// evaluated in log space so extreme tails neither flush to zero nor lose
// their gradients.
double laplace_integer_pmf(long k, double mu, double scale);

struct LaplaceBits {
  double bits;    // -log2 P
  double d_dz;    // d bits / d z
  double d_dmu;   // d bits / d mu
  double d_dscale;
};

LaplaceBits laplace_bits(double z, double mu, double scale);

// Training-time rate: -sum log2 P(z_e | ctx_e) over every element of every
// grid, with contexts read from the same (continuous) values.
double latent_rate_bits(const LatentPyramid& values, const ArmParams& params,
                        std::span<const std::pair<int, int>> offsets);

}  // namespace lottery
