#pragma once

#include <cstdint>

#include "lottery/model.hpp"

namespace lottery {

// Decoder-side multiply-accumulates per pixel. The lower bound skips
// masked synthesis weights (each active weight fires once per pixel), the
// upper bound counts the dense stack; ModNet, upsampling taps and the ARM
// (normalized from per-latent-element to per-pixel) are common to both.
struct MacsBreakdown {
  double synth_lower = 0.0;
  double synth_upper = 0.0;
  double modnet = 0.0;
  double upsample = 0.0;
  double arm = 0.0;

  double lower() const { return synth_lower + modnet + upsample + arm; }
  double upper() const { return synth_upper + modnet + upsample + arm; }
};

inline MacsBreakdown count_macs(const CodecConfig& cfg, std::int64_t active_weights) {
  MacsBreakdown m;
  const double pixels = static_cast<double>(cfg.height) * cfg.width;

  if (cfg.mode != CodecMode::kModNetOnly) {
    SuperMaskConfig sm;
    sm.modnet_width = cfg.modnet_width;
    sm.extra_convs = cfg.extra_convs;
    std::int64_t total = 0;
    const auto in = sm.in_dims();
    for (int i = 0; i < SuperMaskConfig::kLayers; ++i)
      total += static_cast<std::int64_t>(in[i]) * SuperMaskConfig::kOutDims[i];
    m.synth_upper = static_cast<double>(total);
    m.synth_lower = cfg.mode == CodecMode::kDenseTrained ? static_cast<double>(total)
                                                         : static_cast<double>(active_weights);
  }

  m.modnet = static_cast<double>(cfg.latent_levels) * cfg.modnet_width + cfg.modnet_width * 3 +
             9 + cfg.extra_convs * 81.0;
  m.upsample =
      static_cast<double>(upsample_mult_count(cfg.height, cfg.width, cfg.latent_levels)) / pixels;

  const auto shapes = pyramid_shapes(cfg.height, cfg.width, cfg.latent_levels);
  double elements = 0.0;
  for (const auto& s : shapes) elements += static_cast<double>(s.size());
  const double c = cfg.arm_context;
  m.arm = elements * (2.0 * c * c + 2.0 * c) / pixels;
  return m;
}

}  // namespace lottery
