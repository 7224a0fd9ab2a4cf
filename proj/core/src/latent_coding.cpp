#include "lottery/latent_coding.hpp"

#include <cmath>
#include <stdexcept>

namespace lottery {

namespace {

template <class PerElement>
void walk_elements(const std::vector<GridShape>& shapes, PerElement&& fn) {
  for (std::size_t g = 0; g < shapes.size(); ++g) {
    const int h = shapes[g].height, w = shapes[g].width;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) fn(static_cast<int>(g), y, x);
  }
}

}  // namespace

std::vector<std::pair<int, int>> latent_bounds(const LatentPyramid& zhat) {
  std::vector<std::pair<int, int>> bounds;
  bounds.reserve(zhat.levels());
  for (const auto& grid : zhat.grids) {
    int lo = 0, hi = 0;
    for (double v : grid) {
      const int q = static_cast<int>(std::llround(v));
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    bounds.emplace_back(lo, hi);
  }
  return bounds;
}

LatentCode encode_latents(const LatentPyramid& zhat, const ArmParams& arm,
                          std::span<const std::pair<int, int>> offsets,
                          std::span<const std::pair<int, int>> level_bounds) {
  const auto shapes = pyramid_shapes(zhat.height, zhat.width, zhat.levels());
  LatentCode out;
  RangeEncoder enc;
  std::vector<double> ctx(arm.context_size);
  ArmTape tape;
  init_arm_tape(arm, tape);
  walk_elements(shapes, [&](int g, int y, int x) {
    const auto& grid = zhat.grids[g];
    const int w = shapes[g].width;
    extract_context(grid, shapes[g].height, w, y, x, offsets, ctx);
    const ArmEval eval = arm_eval_tape(ctx, arm, tape);
    const QuantizedCdf cdf =
        quantize_cdf(eval.mu, eval.scale, level_bounds[g].first, level_bounds[g].second);
    const int sym = static_cast<int>(std::llround(grid[static_cast<std::size_t>(y) * w + x]));
    cdf.encode_symbol(enc, sym);
    out.model_bits += cdf.bits(sym);
  });
  out.bytes = enc.finish();
  return out;
}

LatentPyramid decode_latents(std::span<const std::uint8_t> bytes, int height, int width,
                             int levels, const ArmParams& arm,
                             std::span<const std::pair<int, int>> offsets,
                             std::span<const std::pair<int, int>> level_bounds) {
  const auto shapes = pyramid_shapes(height, width, levels);
  LatentPyramid zhat(height, width, levels);
  RangeDecoder dec(bytes);
  std::vector<double> ctx(arm.context_size);
  ArmTape tape;
  init_arm_tape(arm, tape);
  walk_elements(shapes, [&](int g, int y, int x) {
    auto& grid = zhat.grids[g];
    const int w = shapes[g].width;
    extract_context(grid, shapes[g].height, w, y, x, offsets, ctx);
    const ArmEval eval = arm_eval_tape(ctx, arm, tape);
    const QuantizedCdf cdf =
        quantize_cdf(eval.mu, eval.scale, level_bounds[g].first, level_bounds[g].second);
    grid[static_cast<std::size_t>(y) * w + x] = cdf.decode_symbol(dec);
  });
  return zhat;
}

double predicted_latent_bits(const LatentPyramid& zhat, const ArmParams& arm,
                             std::span<const std::pair<int, int>> offsets,
                             std::span<const std::pair<int, int>> level_bounds) {
  const auto shapes = pyramid_shapes(zhat.height, zhat.width, zhat.levels());
  double bits = 0.0;
  std::vector<double> ctx(arm.context_size);
  ArmTape tape;
  init_arm_tape(arm, tape);
  walk_elements(shapes, [&](int g, int y, int x) {
    const auto& grid = zhat.grids[g];
    const int w = shapes[g].width;
    extract_context(grid, shapes[g].height, w, y, x, offsets, ctx);
    const ArmEval eval = arm_eval_tape(ctx, arm, tape);
    const QuantizedCdf cdf =
        quantize_cdf(eval.mu, eval.scale, level_bounds[g].first, level_bounds[g].second);
    bits += cdf.bits(static_cast<int>(std::llround(grid[static_cast<std::size_t>(y) * w + x])));
  });
  return bits;
}

}  // namespace lottery
