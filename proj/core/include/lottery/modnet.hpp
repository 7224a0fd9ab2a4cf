#pragma once

#include <cstdint>
#include <vector>

#include "lottery/grid.hpp"
#include "lottery/rng.hpp"

namespace lottery {

struct GridShape {
  int height = 0;
  int width = 0;
  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
};

// Level g (0-based) has shape ceil(H/2^g) x ceil(W/2^g).
std::vector<GridShape> pyramid_shapes(int height, int width, int levels);

// Multi-resolution latent grids; level 0 is full resolution. Values are
// real during training and integers after hard rounding.
struct LatentPyramid {
  int height = 0;
  int width = 0;
  std::vector<std::vector<double>> grids;  // row-major per level

  LatentPyramid() = default;
  LatentPyramid(int h, int w, int levels);

  int levels() const { return static_cast<int>(grids.size()); }
  std::size_t total_elements() const;
};

// Upsamples every level to full resolution with the fixed separable
// linear-interpolation kernel [0.25 0.75 0.75 0.25], stride 2:
//   out[2j]   = 0.75*in[j] + 0.25*in[j+1]
//   out[2j+1] = 0.25*in[j] + 0.75*in[j+1]   (replicate-pad at the border),
// cropping top-left to the next level's shape after each doubling.
// Channel g of the result is level g upsampled g times.
PixelGrid upsample_pyramid(const LatentPyramid& pyramid);

// Exact adjoint of upsample_pyramid: maps a gradient w.r.t. the L x H x W
// output back to per-level gradients.
LatentPyramid upsample_pyramid_adjoint(const PixelGrid& d_u0, int levels);

// Single 1D doubling step and its adjoint, exposed for tests.
void upsample_axis(std::span<const double> in, std::span<double> out);

// Multiplies performed by upsample_pyramid (2 taps per produced sample per
// axis pass), for the complexity accounting.
std::int64_t upsample_mult_count(int height, int width, int levels);

// The modulation network: 1x1 convolutions L -> d -> 3 -> 3 with GELU after
// the first two, plus optional trailing 3x3 convolutions (the improved
// variant) each applied to the GELU of the previous output.
struct ModNetParams {
  int latent_count = 7;  // input channels of conv1
  int width = 32;        // d
  int extra_convs = 0;   // 0 = base variant

  Matrix conv1;  // d x L
  std::vector<double> bias1;
  Matrix conv2;  // 3 x d
  std::vector<double> bias2;
  Matrix conv3;  // 3 x 3
  std::vector<double> bias3;
  std::vector<Matrix> extra;  // each 3 x 27 (out, in*ky*kx), replicate pad
  std::vector<std::vector<double>> extra_bias;

  std::size_t param_count() const;
  // Flattened view in the fixed serialization order (conv1 w, conv1 b, ...).
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

ModNetParams init_modnet(int latent_count, int width, int extra_convs, std::uint64_t seed);

// Full-resolution activations kept for the backward pass, along with the
// GELU derivatives at the two hidden preactivations.
struct ModNetTape {
  PixelGrid u1;  // gelu(conv1(u0)), d channels
  PixelGrid u2;  // gelu(conv2(u1)), 3 channels
  PixelGrid u3;  // conv3(u2), 3 channels
  PixelGrid deriv1;  // gelu'(conv1(u0) + b1)
  PixelGrid deriv2;  // gelu'(conv2(u1) + b2)
  std::vector<PixelGrid> extra_out;    // successive 3x3 conv outputs
  std::vector<PixelGrid> extra_deriv;  // gelu' at each extra conv input
};

// Runs the ModNet over the upsampled pyramid u0 (L x H x W).
void modnet_forward(const PixelGrid& u0, const ModNetParams& params, ModNetTape& tape);

// Accumulated parameter gradients, same shapes as ModNetParams.
struct ModNetGrads {
  Matrix conv1;
  std::vector<double> bias1;
  Matrix conv2;
  std::vector<double> bias2;
  Matrix conv3;
  std::vector<double> bias3;
  std::vector<Matrix> extra;
  std::vector<std::vector<double>> extra_bias;

  explicit ModNetGrads(const ModNetParams& params);
  void add(const ModNetGrads& other);
  std::vector<double> flatten() const;
};

// Backward through the ModNet. d_u1/d_u2/d_u3/d_extra are gradients w.r.t.
// the corresponding tape outputs (accumulated by the synthesis backward);
// returns the gradient w.r.t. u0 and accumulates parameter gradients.
PixelGrid modnet_backward(const PixelGrid& u0, const ModNetParams& params,
                          const ModNetTape& tape, const PixelGrid& d_u1,
                          const PixelGrid& d_u2, PixelGrid d_u3,
                          std::vector<PixelGrid> d_extra, ModNetGrads& grads);

// Deepest-first modulation outputs: [last extra conv (if any), u3, u2, u1].
std::vector<const PixelGrid*> modulation_sources(const ModNetTape& tape, int extra_convs);

// Number of channels of modulation i (1-based) for a given d/variant.
int modulation_channels(int index, int width, int extra_convs);

// M_i as a materialized grid: the first (i + extra?1:0) modulation sources
// concatenated deepest-first.
PixelGrid rewind_concat(const ModNetTape& tape, int extra_convs, int index);

}  // namespace lottery
