#include "lottery/decoder.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "lottery/latent_coding.hpp"

namespace lottery {

DecodeResult decode_image(std::span<const std::uint8_t> bytes, bool sparse_synthesis) {
  const Bitstream stream = parse_bitstream(bytes);
  const BitstreamHeader& h = stream.header;

  CodecConfig cfg;
  cfg.height = static_cast<int>(h.height);
  cfg.width = static_cast<int>(h.width);
  cfg.seed = h.seed;
  cfg.mode = h.mode;
  cfg.latent_levels = h.latent_levels;
  cfg.modnet_width = h.modnet_width;
  cfg.arm_context = h.arm_context;
  cfg.extra_convs = h.extra_convs;
  cfg.mask_ratio = h.mask_ratio;
  cfg.fourier.phase_count = h.fourier_phases;
  cfg.fourier.freq_count = h.fourier_freqs;
  CodecModel model = build_model(cfg);

  // Mask first: it configures the subnetwork the synthesis will run on.
  if (h.mode == CodecMode::kLottery) {
    std::vector<std::size_t> sizes;
    for (const auto& layer : model.synth.layers) sizes.push_back(layer.weight_count());
    install_mask(model.synth, decode_mask(stream.tau, sizes, h.active_count));
  }

  // Network parameters.
  const double delta_psi = std::exp2(-static_cast<double>(h.delta_psi_log2));
  const std::vector<double> psi = decompress_network_params(
      stream.psi, model.arm.param_count(), delta_psi, h.stddev_psi, h.psi_bounds.lo,
      h.psi_bounds.hi);
  model.arm.unflatten(psi);

  const double delta_theta = std::exp2(-static_cast<double>(h.delta_theta_log2));
  const std::vector<double> theta = decompress_network_params(
      stream.theta, model.modnet.param_count(), delta_theta, h.stddev_theta, h.theta_bounds.lo,
      h.theta_bounds.hi);
  model.modnet.unflatten(theta);

  if (h.mode == CodecMode::kDenseTrained) {
    const double delta_w = std::exp2(-static_cast<double>(h.delta_w_log2));
    std::size_t n = 0;
    for (const auto& layer : model.synth.layers) n += layer.weight_count();
    const std::vector<double> w = decompress_network_params(
        stream.w, n, delta_w, h.stddev_w, h.w_bounds.lo, h.w_bounds.hi);
    std::size_t off = 0;
    for (auto& layer : model.synth.layers) {
      std::copy(w.begin() + off, w.begin() + off + layer.weight_count(), layer.w0.a.begin());
      off += layer.weight_count();
    }
    refresh_mask(model.synth);  // tau == 1, rebuilds the materialized weights
  }

  // Latents, strictly sequential within each level.
  std::vector<std::pair<int, int>> bounds;
  for (const auto& b : h.latent_bounds) bounds.emplace_back(b.lo, b.hi);
  const LatentPyramid zhat = decode_latents(stream.z, cfg.height, cfg.width, cfg.latent_levels,
                                            model.arm, model.ctx_offsets, bounds);

  ReconstructionStats stats;
  DecodeResult result;
  result.image = reconstruct(model, zhat, sparse_synthesis, &stats);

  const double pixels = static_cast<double>(cfg.height) * cfg.width;
  const double c = cfg.arm_context;
  const double arm_mults = static_cast<double>(zhat.total_elements()) * (2.0 * c * c + 2.0 * c);
  result.synth_macs_per_pixel = static_cast<double>(stats.synth_mults) / pixels;
  result.macs_per_pixel =
      (static_cast<double>(stats.synth_mults + stats.modnet_mults + stats.upsample_mults) +
       arm_mults) /
      pixels;
  return result;
}

}  // namespace lottery
