#include "lottery/encoder.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "lottery/complexity.hpp"
#include "lottery/latent_coding.hpp"
#include "lottery/quantnoise.hpp"

namespace lottery {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++state.t;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grads[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

namespace {

// The score learning rate tracks the main rate through the shared schedule
// shape, scaled by the ratio of the configured bases (0.1 vs 1e-2).
constexpr double kScoreLrRatio = 10.0;

std::vector<double> flatten_pyramid(const LatentPyramid& p) {
  std::vector<double> flat;
  flat.reserve(p.total_elements());
  for (const auto& g : p.grids) flat.insert(flat.end(), g.begin(), g.end());
  return flat;
}

void unflatten_pyramid(std::span<const double> flat, LatentPyramid& p) {
  std::size_t off = 0;
  for (auto& g : p.grids) {
    std::copy(flat.begin() + off, flat.begin() + off + g.size(), g.begin());
    off += g.size();
  }
}

std::vector<double> flatten_layers(const std::vector<LayerWeights>& layers, bool scores) {
  std::vector<double> flat;
  for (const auto& l : layers) {
    const auto& m = scores ? l.scores.a : l.w0.a;
    flat.insert(flat.end(), m.begin(), m.end());
  }
  return flat;
}

void unflatten_layers(std::span<const double> flat, std::vector<LayerWeights>& layers,
                      bool scores) {
  std::size_t off = 0;
  for (auto& l : layers) {
    auto& m = scores ? l.scores.a : l.w0.a;
    std::copy(flat.begin() + off, flat.begin() + off + m.size(), m.begin());
    off += m.size();
  }
}

std::vector<double> concat_grads(const std::vector<std::vector<double>>& per_layer) {
  std::vector<double> flat;
  for (const auto& g : per_layer) flat.insert(flat.end(), g.begin(), g.end());
  return flat;
}

struct Snapshot {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> z, theta, psi, scores, weights;
};

struct ParamState {
  AdamState z, theta, psi, weights;
  ParamState(std::size_t nz, std::size_t nt, std::size_t np, std::size_t nw)
      : z(nz), theta(nt), psi(np), weights(nw) {}
};

double image_mse(const PixelGrid& a, const PixelGrid& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sq += d * d;
  }
  return sq / static_cast<double>(a.values.size());
}

EncodeResult encode_impl(const PixelGrid& image, const EncoderConfig& cfg, CodecMode mode) {
  const auto t_start = std::chrono::steady_clock::now();
  if (image.channels != 3 || image.height < 1 || image.width < 1)
    throw std::invalid_argument("encode_image: expected a 3xHxW image");
  for (double v : image.values)
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
      throw std::invalid_argument("encode_image: pixel values must lie in [0, 1]");

  CodecConfig mc;
  mc.height = image.height;
  mc.width = image.width;
  mc.seed = cfg.seed;
  mc.mode = mode;
  mc.latent_levels = cfg.latent_levels;
  mc.modnet_width = cfg.modnet_width;
  mc.arm_context = cfg.arm_context;
  mc.extra_convs = cfg.extra_convs;
  mc.mask_ratio = cfg.mask_ratio;
  mc.fourier = cfg.fourier;
  CodecModel model = build_model(mc);

  const std::int64_t pixels = static_cast<std::int64_t>(mc.height) * mc.width;
  const bool lottery = mode == CodecMode::kLottery;
  const bool dense = mode == CodecMode::kDenseTrained;

  std::vector<double> theta_flat = model.modnet.flatten();
  std::vector<double> psi_flat = model.arm.flatten();
  ParamState opt(model.latents.total_elements(), theta_flat.size(), psi_flat.size(),
                 dense ? static_cast<std::size_t>(model.synth.total_weights()) : 0);

  Snapshot best;
  auto maybe_snapshot = [&](double cost) {
    if (cost >= best.cost) return;
    best.cost = cost;
    best.z = flatten_pyramid(model.latents);
    best.theta = model.modnet.flatten();
    best.psi = model.arm.flatten();
    if (lottery) best.scores = flatten_layers(model.synth.layers, true);
    if (dense) best.weights = flatten_layers(model.synth.layers, false);
  };

  auto hard_cost = [&]() {
    // Mask refresh keeps the evaluation consistent with what a restore of
    // the current scores would rebuild.
    if (lottery || dense) refresh_mask(model.synth);
    const LatentPyramid zhat = rounded_latents(model.latents);
    return evaluate_loss(model, image, zhat, cfg.lambda).loss;
  };

  auto apply_updates = [&](const Gradients& grads, double lr) {
    std::vector<double> z_flat = flatten_pyramid(model.latents);
    const std::vector<double> dz = flatten_pyramid(grads.z);
    if (cfg.force_plain_sgd)
      sgd_step(z_flat, dz, lr);
    else
      adam_step(z_flat, dz, opt.z, lr);
    unflatten_pyramid(z_flat, model.latents);

    const std::vector<double> dtheta = grads.modnet.flatten();
    const std::vector<double> dpsi = grads.arm.flatten();
    if (cfg.force_plain_sgd) {
      sgd_step(theta_flat, dtheta, lr);
      sgd_step(psi_flat, dpsi, lr);
    } else {
      adam_step(theta_flat, dtheta, opt.theta, lr);
      adam_step(psi_flat, dpsi, opt.psi, lr);
    }
    model.modnet.unflatten(theta_flat);
    model.arm.unflatten(psi_flat);

    if (lottery) update_scores(model.synth, grads.scores, kScoreLrRatio * lr);
    if (dense) {
      std::vector<double> w_flat = flatten_layers(model.synth.layers, false);
      const std::vector<double> dw = concat_grads(grads.weights);
      if (cfg.force_plain_sgd)
        sgd_step(w_flat, dw, lr);
      else
        adam_step(w_flat, dw, opt.weights, lr);
      unflatten_layers(w_flat, model.synth.layers, false);
    }
  };

  auto diverged = [&](Stage stage, long step, double lr, const LossBreakdown& lb) {
    std::ostringstream os;
    os << "encode diverged: stage " << (stage == Stage::kOne ? "I" : "II") << " step " << step
       << " lr " << lr << " mse " << lb.mse << " rate_bits " << lb.rate_bits;
    throw EncodeError(os.str());
  };

  // Stage I: soft-rounded noisy latents, cosine learning rate.
  const StageSchedule s1 = StageSchedule::stage1(cfg.stage1_steps);
  for (long step = 0; step < s1.steps; ++step) {
    const SchedulePoint sp = schedule_at(s1, step);
    if (lottery || dense) refresh_mask(model.synth);  // dense refreshes tau==1 weights
    const LatentState ls = stage1_latents(model.latents, sp.temperature, sp.noise_a, cfg.seed, step);
    Gradients grads(model);
    const LossBreakdown lb = loss_and_gradients(model, image, ls, cfg.lambda, grads);
    if (!std::isfinite(lb.loss)) diverged(Stage::kOne, step, sp.lr, lb);
    apply_updates(grads, sp.lr);
    if (step % cfg.eval_interval == 0 || step == s1.steps - 1) maybe_snapshot(hard_cost());
  }

  // Stage II: hard-rounded latents, plateau-decayed learning rate. Every
  // step evaluates the deployable RD cost, so snapshots are free.
  const StageSchedule s2 = StageSchedule::stage2(cfg.stage2_steps);
  PlateauDecay plateau(s2);
  for (long step = 0; step < s2.steps; ++step) {
    const double lr = plateau.current_lr();
    if (lottery || dense) refresh_mask(model.synth);
    const LatentState ls = stage2_latents(model.latents);
    Gradients grads(model);
    const LossBreakdown lb = loss_and_gradients(model, image, ls, cfg.lambda, grads);
    if (!std::isfinite(lb.loss)) diverged(Stage::kTwo, step, lr, lb);
    maybe_snapshot(lb.loss);
    apply_updates(grads, lr);
    plateau.observe(lb.loss);
  }

  // Restore the best tracked model.
  if (std::isfinite(best.cost)) {
    unflatten_pyramid(best.z, model.latents);
    model.modnet.unflatten(best.theta);
    theta_flat = best.theta;
    model.arm.unflatten(best.psi);
    psi_flat = best.psi;
    if (lottery) {
      unflatten_layers(best.scores, model.synth.layers, true);
      refresh_mask(model.synth);
    }
    if (dense) {
      unflatten_layers(best.weights, model.synth.layers, false);
      refresh_mask(model.synth);
    }
  }

  const LatentPyramid zhat = rounded_latents(model.latents);
  const auto bounds = latent_bounds(zhat);
  for (const auto& [lo, hi] : bounds)
    if (lo < -32768 || hi > 32767) throw EncodeError("latents exceed the 16-bit header range");

  const double mse_unquantized = image_mse(reconstruct(model, zhat), image);

  // Quantization-step search: psi is rate-only (its own section plus the
  // latent section it models), theta trades distortion against its rate.
  auto int16_fits = [](const CompressedParams& cp) {
    return cp.qlo >= -32768 && cp.qhi <= 32767;
  };
  auto psi_cost = [&](double delta) {
    const CompressedParams cp = compress_network_params(psi_flat, delta);
    if (!int16_fits(cp)) return std::numeric_limits<double>::infinity();
    ArmParams cand = model.arm;
    cand.unflatten(cp.reconstructed);
    return cp.model_bits + predicted_latent_bits(zhat, cand, model.ctx_offsets, bounds);
  };
  CodecModel scratch = model;
  auto theta_cost = [&](double delta) {
    const CompressedParams cp = compress_network_params(theta_flat, delta);
    if (!int16_fits(cp)) return std::numeric_limits<double>::infinity();
    scratch.modnet.unflatten(cp.reconstructed);
    const double d = image_mse(reconstruct(scratch, zhat), image);
    return d + cfg.lambda * cp.model_bits / static_cast<double>(pixels);
  };
  const StepSearchResult steps = search_quantization_steps(psi_cost, theta_cost);

  const CompressedParams cp_psi =
      compress_network_params(psi_flat, std::exp2(-steps.psi_log2));
  const CompressedParams cp_theta =
      compress_network_params(theta_flat, std::exp2(-steps.theta_log2));
  model.arm.unflatten(cp_psi.reconstructed);
  model.modnet.unflatten(cp_theta.reconstructed);

  // Dense mode: the trained weights are quantized and coded like theta.
  CompressedParams cp_w;
  int w_log2 = kStepSearchMin;
  if (dense) {
    std::vector<double> w_flat = flatten_layers(model.synth.layers, false);
    double best_cost = std::numeric_limits<double>::infinity();
    CodecModel wscratch = model;
    for (int k = kStepSearchMin; k <= kStepSearchMax; ++k) {
      const CompressedParams cp = compress_network_params(w_flat, std::exp2(-k));
      if (!int16_fits(cp)) continue;
      unflatten_layers(cp.reconstructed, wscratch.synth.layers, false);
      refresh_mask(wscratch.synth);
      const double cost = image_mse(reconstruct(wscratch, zhat), image) +
                          cfg.lambda * cp.model_bits / static_cast<double>(pixels);
      if (cost < best_cost) {
        best_cost = cost;
        w_log2 = k;
      }
    }
    cp_w = compress_network_params(w_flat, std::exp2(-w_log2));
    unflatten_layers(cp_w.reconstructed, model.synth.layers, false);
    refresh_mask(model.synth);
  }

  // Latent section under the quantized ARM.
  const LatentCode z_code = encode_latents(zhat, model.arm, model.ctx_offsets, bounds);

  // Mask section.
  std::vector<std::uint8_t> tau_bytes;
  double tau_model_bits = 0.0;
  std::int64_t active = 0;
  if (lottery) {
    active = model.synth.active_count();
    std::vector<std::span<const std::uint8_t>> mask_spans;
    for (const auto& m : model.synth.mask) mask_spans.emplace_back(m);
    tau_bytes = encode_mask(mask_spans, active);
    const QuantizedCdf cdf = bernoulli_cdf(active, model.synth.total_weights());
    for (const auto& m : model.synth.mask)
      for (std::uint8_t bit : m) tau_model_bits += cdf.bits(bit ? 1 : 0);
  }

  Bitstream stream;
  BitstreamHeader& h = stream.header;
  h.mode = mode;
  h.height = static_cast<std::uint32_t>(mc.height);
  h.width = static_cast<std::uint32_t>(mc.width);
  h.seed = cfg.seed;
  h.mask_ratio = static_cast<float>(cfg.mask_ratio);
  h.modnet_width = static_cast<std::uint16_t>(cfg.modnet_width);
  h.arm_context = static_cast<std::uint16_t>(cfg.arm_context);
  h.latent_levels = static_cast<std::uint8_t>(cfg.latent_levels);
  h.extra_convs = static_cast<std::uint8_t>(cfg.extra_convs);
  h.fourier_phases = static_cast<std::uint16_t>(cfg.fourier.phase_count);
  h.fourier_freqs = static_cast<std::uint16_t>(cfg.fourier.freq_count);
  for (const auto& [lo, hi] : bounds)
    h.latent_bounds.push_back({static_cast<std::int16_t>(lo), static_cast<std::int16_t>(hi)});
  h.delta_theta_log2 = static_cast<std::uint8_t>(steps.theta_log2);
  h.delta_psi_log2 = static_cast<std::uint8_t>(steps.psi_log2);
  h.stddev_theta = cp_theta.stddev;
  h.stddev_psi = cp_psi.stddev;
  h.theta_bounds = {static_cast<std::int16_t>(cp_theta.qlo), static_cast<std::int16_t>(cp_theta.qhi)};
  h.psi_bounds = {static_cast<std::int16_t>(cp_psi.qlo), static_cast<std::int16_t>(cp_psi.qhi)};
  h.active_count = static_cast<std::uint32_t>(active);
  if (dense) {
    h.delta_w_log2 = static_cast<std::uint8_t>(w_log2);
    h.stddev_w = cp_w.stddev;
    h.w_bounds = {static_cast<std::int16_t>(cp_w.qlo), static_cast<std::int16_t>(cp_w.qhi)};
  }
  stream.psi = cp_psi.bytes;
  stream.z = z_code.bytes;
  stream.theta = cp_theta.bytes;
  stream.tau = tau_bytes;
  if (dense) stream.w = cp_w.bytes;

  EncodeResult result;
  result.bytes = serialize(stream);
  result.reconstruction = reconstruct(model, zhat);

  RDRecord& r = result.record;
  r.height = mc.height;
  r.width = mc.width;
  r.mode = mode;
  r.lambda = cfg.lambda;
  r.mask_ratio = cfg.mask_ratio;
  r.seed = cfg.seed;
  r.steps1 = cfg.stage1_steps;
  r.steps2 = cfg.stage2_steps;
  r.modnet_width = cfg.modnet_width;
  r.arm_context = cfg.arm_context;
  r.extra_convs = cfg.extra_convs;
  r.latent_levels = cfg.latent_levels;

  const double px = static_cast<double>(pixels);
  r.bpp_z = 8.0 * static_cast<double>(stream.z.size()) / px;
  r.bpp_tau = 8.0 * static_cast<double>(stream.tau.size()) / px;
  r.bpp_theta = 8.0 * static_cast<double>(stream.theta.size()) / px;
  r.bpp_psi = 8.0 * static_cast<double>(stream.psi.size()) / px;
  r.bpp_w = 8.0 * static_cast<double>(stream.w.size()) / px;
  r.header_bits = 8.0 * static_cast<double>(stream.header.serialized_size() +
                                            (dense ? 5 : 4) * 4);
  r.bpp_header = r.header_bits / px;
  r.bpp_total = 8.0 * static_cast<double>(result.bytes.size()) / px;
  r.mse = image_mse(result.reconstruction, image);
  r.psnr_db = r.mse == 0.0 ? 99.0 : -10.0 * std::log10(r.mse);
  r.psnr_unquantized_db =
      mse_unquantized == 0.0 ? 99.0 : -10.0 * std::log10(mse_unquantized);
  r.rd_cost = r.mse + cfg.lambda * r.bpp_total;
  r.model_bits_total =
      cp_psi.model_bits + z_code.model_bits + cp_theta.model_bits + tau_model_bits +
      (dense ? cp_w.model_bits : 0.0);
  const MacsBreakdown macs = count_macs(mc, active);
  r.macs_lower = macs.lower();
  r.macs_upper = macs.upper();
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace

EncodeResult encode_image(const PixelGrid& image, const EncoderConfig& cfg) {
  return encode_impl(image, cfg, CodecMode::kLottery);
}

EncodeResult ablation_encode(const PixelGrid& image, const EncoderConfig& cfg, CodecMode mode) {
  return encode_impl(image, cfg, mode);
}

}  // namespace lottery
