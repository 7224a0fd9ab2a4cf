#include "lottery/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lottery/activation.hpp"
#include "lottery/parallel.hpp"
#include "lottery/quantnoise.hpp"

namespace lottery {

namespace {

constexpr std::int64_t kPixelChunk = 2048;
constexpr std::int64_t kElemChunk = 4096;

// Maps a flat modulation channel onto (source grid, channel) in the
// deepest-first source order; M_i is a prefix of M_{i+1}.
struct ChannelRef {
  int source;
  int channel;
};

std::vector<ChannelRef> build_channel_map(const std::vector<const PixelGrid*>& sources) {
  std::vector<ChannelRef> map;
  for (std::size_t s = 0; s < sources.size(); ++s)
    for (int c = 0; c < sources[s]->channels; ++c)
      map.push_back({static_cast<int>(s), c});
  return map;
}

// Active weights in compressed-row form for the masked-skip synthesis path.
struct SparseLayer {
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
};

std::vector<SparseLayer> build_sparse_layers(const SuperMaskNet& net) {
  std::vector<SparseLayer> layers(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Matrix& w = net.masked[l];
    SparseLayer& s = layers[l];
    s.row_ptr.assign(w.rows + 1, 0);
    for (int r = 0; r < w.rows; ++r) {
      for (int c = 0; c < w.cols; ++c) {
        if (net.mask[l][static_cast<std::size_t>(r) * w.cols + c]) {
          s.col.push_back(c);
          s.val.push_back(w.at(r, c));
        }
      }
      s.row_ptr[r + 1] = static_cast<int>(s.col.size());
    }
  }
  return layers;
}

void sparse_forward_pixel(const SuperMaskNet& net, const std::vector<SparseLayer>& sparse,
                          double coord_row, double coord_col,
                          const std::array<std::span<const double>, 3>& mods, SynthTape& tape) {
  tape.input[0][0] = coord_row;
  tape.input[0][1] = coord_col;
  for (int i = 0; i < SuperMaskConfig::kLayers; ++i) {
    if (i > 0) {
      const auto& mod = mods[i - 1];
      std::copy(mod.begin(), mod.end(), tape.input[i].begin());
      const auto& prev_pre = tape.pre[i - 1];
      for (std::size_t k = 0; k < prev_pre.size(); ++k)
        tape.input[i][mod.size() + k] = gelu_value(prev_pre[k]);
    }
    const SparseLayer& s = sparse[i];
    for (int r = 0; r < static_cast<int>(tape.pre[i].size()); ++r) {
      double acc = 0.0;
      for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k)
        acc += s.val[k] * tape.input[i][s.col[k]];
      tape.pre[i][r] = acc;
    }
  }
  for (int k = 0; k < 3; ++k) tape.rgb[k] = 0.5 * (std::tanh(tape.pre[3][k]) + 1.0);
}

std::int64_t modnet_mults_per_pixel(const ModNetParams& p) {
  return static_cast<std::int64_t>(p.latent_count) * p.width + p.width * 3 + 9 +
         static_cast<std::int64_t>(p.extra_convs) * 81;
}

}  // namespace

CodecModel build_model(const CodecConfig& cfg) {
  if (cfg.height < 1 || cfg.width < 1) throw std::invalid_argument("build_model: empty image");
  if (cfg.latent_levels < 1) throw std::invalid_argument("build_model: latent_levels must be >= 1");
  CodecModel model;
  model.cfg = cfg;
  if (cfg.mode != CodecMode::kModNetOnly) {
    SuperMaskConfig sm;
    sm.modnet_width = cfg.modnet_width;
    sm.extra_convs = cfg.extra_convs;
    sm.mask_ratio = cfg.mode == CodecMode::kDenseTrained ? 1.0 : cfg.mask_ratio;
    model.synth = build_supermask_net(sm, cfg.fourier, cfg.seed);
  }
  model.modnet = init_modnet(cfg.latent_levels, cfg.modnet_width, cfg.extra_convs, cfg.seed);
  model.arm = init_arm(cfg.arm_context, cfg.seed);
  model.latents = LatentPyramid(cfg.height, cfg.width, cfg.latent_levels);
  model.ctx_offsets = build_context_template(cfg.arm_context);
  return model;
}

PixelGrid reconstruct(const CodecModel& model, const LatentPyramid& zhat, bool sparse_synthesis,
                      ReconstructionStats* stats) {
  const int h = model.cfg.height, w = model.cfg.width;
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;

  const PixelGrid u0 = upsample_pyramid(zhat);
  ModNetTape tape;
  modnet_forward(u0, model.modnet, tape);

  PixelGrid out(3, h, w);
  if (!model.has_synth()) {
    const PixelGrid& last =
        model.cfg.extra_convs > 0 ? tape.extra_out.back() : tape.u3;
    parallel_chunks(pixels, kPixelChunk, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
      for (std::int64_t p = begin; p < end; ++p)
        for (int k = 0; k < 3; ++k)
          out.values[k * pixels + p] = 0.5 * (std::tanh(last.values[k * pixels + p]) + 1.0);
    });
  } else {
    const auto sources = modulation_sources(tape, model.cfg.extra_convs);
    const auto channel_map = build_channel_map(sources);
    const int m_total = static_cast<int>(channel_map.size());
    const int m1 = model.synth.cfg.mod_channels(2);
    const int m2 = model.synth.cfg.mod_channels(3);
    const std::vector<SparseLayer> sparse =
        sparse_synthesis ? build_sparse_layers(model.synth) : std::vector<SparseLayer>{};

    parallel_chunks(pixels, kPixelChunk, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
      SynthTape synth_tape;
      init_tape(model.synth, synth_tape);
      std::vector<double> modbuf(m_total);
      for (std::int64_t p = begin; p < end; ++p) {
        const int y = static_cast<int>(p / w);
        const int x = static_cast<int>(p % w);
        for (int mch = 0; mch < m_total; ++mch)
          modbuf[mch] =
              sources[channel_map[mch].source]->values[channel_map[mch].channel * pixels + p];
        const std::array<std::span<const double>, 3> mods = {
            std::span<const double>(modbuf.data(), m1),
            std::span<const double>(modbuf.data(), m2),
            std::span<const double>(modbuf.data(), m_total)};
        if (sparse_synthesis)
          sparse_forward_pixel(model.synth, sparse, normalized_coord(y, h),
                               normalized_coord(x, w), mods, synth_tape);
        else
          synth_forward_pixel(model.synth, normalized_coord(y, h), normalized_coord(x, w), mods,
                              synth_tape);
        for (int k = 0; k < 3; ++k) out.values[k * pixels + p] = synth_tape.rgb[k];
      }
    });
  }

  if (stats) {
    stats->upsample_mults = upsample_mult_count(h, w, model.cfg.latent_levels);
    stats->modnet_mults = modnet_mults_per_pixel(model.modnet) * pixels;
    if (model.has_synth())
      stats->synth_mults =
          (sparse_synthesis ? model.synth.active_count() : model.synth.total_weights()) * pixels;
  }
  return out;
}

LatentState stage1_latents(const LatentPyramid& z, double temperature, double noise_a,
                           std::uint64_t seed, long step) {
  LatentState state;
  state.zhat = z;
  state.chain = z;
  Rng noise = derive_stream(seed, "kumaraswamy/step" + std::to_string(step));
  for (int g = 0; g < z.levels(); ++g) {
    const auto& src = z.grids[g];
    auto& val = state.zhat.grids[g];
    auto& der = state.chain.grids[g];
    for (std::size_t i = 0; i < src.size(); ++i) {
      const ValueGrad sr = soft_round(src[i], temperature);
      const double u = noise_a > 0.0 ? kumaraswamy_noise(noise_a, noise) : 0.0;
      val[i] = sr.value + u;
      der[i] = sr.deriv;
    }
  }
  return state;
}

LatentState stage2_latents(const LatentPyramid& z) {
  LatentState state;
  state.zhat = z;
  state.chain = z;
  for (int g = 0; g < z.levels(); ++g) {
    const auto& src = z.grids[g];
    auto& val = state.zhat.grids[g];
    auto& der = state.chain.grids[g];
    for (std::size_t i = 0; i < src.size(); ++i) {
      val[i] = hard_round(src[i]);
      der[i] = hard_round_surrogate_deriv(src[i]);
    }
  }
  return state;
}

LatentPyramid rounded_latents(const LatentPyramid& z) {
  LatentPyramid out = z;
  for (auto& grid : out.grids)
    for (double& v : grid) v = hard_round(v);
  return out;
}

Gradients::Gradients(const CodecModel& model)
    : z(model.cfg.height, model.cfg.width, model.cfg.latent_levels),
      modnet(model.modnet),
      arm(model.arm) {
  if (model.has_synth()) {
    for (const auto& layer : model.synth.layers) {
      scores.emplace_back(layer.weight_count(), 0.0);
      if (model.cfg.mode == CodecMode::kDenseTrained)
        weights.emplace_back(layer.weight_count(), 0.0);
    }
  }
}

LossBreakdown evaluate_loss(const CodecModel& model, const PixelGrid& image,
                            const LatentPyramid& zhat, double lambda) {
  const PixelGrid recon = reconstruct(model, zhat);
  double sq = 0.0;
  for (std::size_t i = 0; i < recon.values.size(); ++i) {
    const double d = recon.values[i] - image.values[i];
    sq += d * d;
  }
  LossBreakdown lb;
  lb.mse = sq / static_cast<double>(recon.values.size());
  lb.rate_bits = latent_rate_bits(zhat, model.arm, model.ctx_offsets);
  lb.loss = lb.mse + lambda * lb.rate_bits /
                         (static_cast<double>(model.cfg.height) * model.cfg.width);
  return lb;
}

LossBreakdown loss_and_gradients(const CodecModel& model, const PixelGrid& image,
                                 const LatentState& state, double lambda, Gradients& grads) {
  const int h = model.cfg.height, w = model.cfg.width;
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;
  if (image.channels != 3 || image.height != h || image.width != w)
    throw std::invalid_argument("loss_and_gradients: image shape mismatch");

  const PixelGrid u0 = upsample_pyramid(state.zhat);
  ModNetTape tape;
  modnet_forward(u0, model.modnet, tape);

  PixelGrid d_u1(model.modnet.width, h, w);
  PixelGrid d_u2(3, h, w);
  PixelGrid d_u3(3, h, w);
  std::vector<PixelGrid> d_extra(model.cfg.extra_convs, PixelGrid(3, h, w));
  const double d_mse_scale = 2.0 / (3.0 * static_cast<double>(pixels));

  const std::int64_t pix_chunks = chunk_count(pixels, kPixelChunk);
  std::vector<double> mse_partial(pix_chunks, 0.0);

  if (!model.has_synth()) {
    PixelGrid& d_last = model.cfg.extra_convs > 0 ? d_extra.back() : d_u3;
    const PixelGrid& last = model.cfg.extra_convs > 0 ? tape.extra_out.back() : tape.u3;
    parallel_chunks(pixels, kPixelChunk,
                    [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
      double sq = 0.0;
      for (std::int64_t p = begin; p < end; ++p) {
        for (int k = 0; k < 3; ++k) {
          const double y = std::tanh(last.values[k * pixels + p]);
          const double recon = 0.5 * (y + 1.0);
          const double diff = recon - image.values[k * pixels + p];
          sq += diff * diff;
          d_last.values[k * pixels + p] = diff * d_mse_scale * 0.5 * (1.0 - y * y);
        }
      }
      mse_partial[chunk] = sq;
    });
  } else {
    const auto sources = modulation_sources(tape, model.cfg.extra_convs);
    const auto channel_map = build_channel_map(sources);
    const int m_total = static_cast<int>(channel_map.size());
    const int m1 = model.synth.cfg.mod_channels(2);
    const int m2 = model.synth.cfg.mod_channels(3);

    // Gradient sinks per source grid, matching modulation_sources order.
    std::vector<PixelGrid*> d_sources;
    if (model.cfg.extra_convs > 0) d_sources.push_back(&d_extra.back());
    d_sources.push_back(&d_u3);
    d_sources.push_back(&d_u2);
    d_sources.push_back(&d_u1);

    const bool dense = model.cfg.mode == CodecMode::kDenseTrained;
    std::vector<std::vector<std::vector<double>>> score_partial(
        pix_chunks, std::vector<std::vector<double>>());
    std::vector<std::vector<std::vector<double>>> weight_partial(
        pix_chunks, std::vector<std::vector<double>>());

    parallel_chunks(pixels, kPixelChunk,
                    [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
      SynthTape synth_tape;
      init_tape(model.synth, synth_tape);
      std::vector<double> modbuf(m_total);
      std::vector<double> dm1(m1), dm2(m2), dm3(m_total);
      auto& score_acc = score_partial[chunk];
      auto& weight_acc = weight_partial[chunk];
      for (const auto& layer : model.synth.layers) {
        score_acc.emplace_back(layer.weight_count(), 0.0);
        if (dense) weight_acc.emplace_back(layer.weight_count(), 0.0);
      }
      std::array<double, 3> d_rgb;
      double sq = 0.0;
      for (std::int64_t p = begin; p < end; ++p) {
        const int y = static_cast<int>(p / w);
        const int x = static_cast<int>(p % w);
        for (int mch = 0; mch < m_total; ++mch)
          modbuf[mch] =
              sources[channel_map[mch].source]->values[channel_map[mch].channel * pixels + p];
        const std::array<std::span<const double>, 3> mods = {
            std::span<const double>(modbuf.data(), m1),
            std::span<const double>(modbuf.data(), m2),
            std::span<const double>(modbuf.data(), m_total)};
        synth_forward_pixel(model.synth, normalized_coord(y, h), normalized_coord(x, w), mods,
                            synth_tape);
        for (int k = 0; k < 3; ++k) {
          const double diff = synth_tape.rgb[k] - image.values[k * pixels + p];
          sq += diff * diff;
          d_rgb[k] = diff * d_mse_scale;
        }
        const std::array<std::span<double>, 3> dmods = {
            std::span<double>(dm1.data(), m1), std::span<double>(dm2.data(), m2),
            std::span<double>(dm3.data(), m_total)};
        synth_backward_pixel(model.synth, synth_tape, d_rgb, dmods, &score_acc,
                             dense ? &weight_acc : nullptr);
        for (int mch = 0; mch < m_total; ++mch) {
          double g = dm3[mch];
          if (mch < m2) g += dm2[mch];
          if (mch < m1) g += dm1[mch];
          d_sources[channel_map[mch].source]
              ->values[channel_map[mch].channel * pixels + p] = g;
        }
      }
      mse_partial[chunk] = sq;
    });

    for (std::int64_t c = 0; c < pix_chunks; ++c) {
      for (std::size_t l = 0; l < grads.scores.size(); ++l) {
        const auto& src = score_partial[c][l];
        auto& dst = grads.scores[l];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      if (dense) {
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
          const auto& src = weight_partial[c][l];
          auto& dst = grads.weights[l];
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      }
    }
  }

  double mse_sum = 0.0;
  for (double v : mse_partial) mse_sum += v;

  const PixelGrid d_u0 = modnet_backward(u0, model.modnet, tape, d_u1, d_u2, std::move(d_u3),
                                         std::move(d_extra), grads.modnet);
  LatentPyramid dz = upsample_pyramid_adjoint(d_u0, model.cfg.latent_levels);

  // Rate term and its gradients. Elements are enumerated level-major in
  // raster order; context gradients are scatter lists merged in chunk order.
  const auto shapes = pyramid_shapes(h, w, model.cfg.latent_levels);
  std::vector<std::size_t> grid_offset(model.cfg.latent_levels + 1, 0);
  for (int g = 0; g < model.cfg.latent_levels; ++g)
    grid_offset[g + 1] = grid_offset[g] + shapes[g].size();
  const std::int64_t total_elems = static_cast<std::int64_t>(grid_offset.back());
  const std::int64_t elem_chunks = chunk_count(total_elems, kElemChunk);

  const double rate_scale = lambda / static_cast<double>(pixels);
  std::vector<double> rate_partial(elem_chunks, 0.0);
  std::vector<ArmGrads> arm_partial(elem_chunks, ArmGrads(model.arm));
  std::vector<std::vector<std::pair<std::int64_t, double>>> scatter(elem_chunks);

  parallel_chunks(total_elems, kElemChunk,
                  [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
    ArmTape arm_tape;
    init_arm_tape(model.arm, arm_tape);
    std::vector<double> ctx(model.arm.context_size), d_ctx(model.arm.context_size);
    auto& sc = scatter[chunk];
    double bits_sum = 0.0;
    int g = 0;
    for (std::int64_t e = begin; e < end; ++e) {
      while (e >= static_cast<std::int64_t>(grid_offset[g + 1])) ++g;
      const std::size_t local = e - grid_offset[g];
      const int gw = shapes[g].width;
      const int yy = static_cast<int>(local / gw);
      const int xx = static_cast<int>(local % gw);
      const auto& grid = state.zhat.grids[g];
      extract_context(grid, shapes[g].height, gw, yy, xx, model.ctx_offsets, ctx);
      const ArmEval eval = arm_eval_tape(ctx, model.arm, arm_tape, /*with_derivs=*/true);
      const LaplaceBits lb = laplace_bits(grid[local], eval.mu, eval.scale);
      bits_sum += lb.bits;
      arm_backward(model.arm, arm_tape, rate_scale * lb.d_dmu, rate_scale * lb.d_dscale, d_ctx,
                   arm_partial[chunk]);
      sc.emplace_back(e, rate_scale * lb.d_dz);
      for (std::size_t o = 0; o < model.ctx_offsets.size(); ++o) {
        const int sy = yy + model.ctx_offsets[o].first;
        const int sx = xx + model.ctx_offsets[o].second;
        if (sy >= 0 && sy < shapes[g].height && sx >= 0 && sx < gw && d_ctx[o] != 0.0)
          sc.emplace_back(grid_offset[g] + static_cast<std::size_t>(sy) * gw + sx, d_ctx[o]);
      }
    }
    rate_partial[chunk] = bits_sum;
  });

  double rate_bits = 0.0;
  for (std::int64_t c = 0; c < elem_chunks; ++c) {
    rate_bits += rate_partial[c];
    grads.arm.add(arm_partial[c]);
    for (const auto& [flat, val] : scatter[c]) {
      int g = 0;
      while (flat >= static_cast<std::int64_t>(grid_offset[g + 1])) ++g;
      dz.grids[g][flat - grid_offset[g]] += val;
    }
  }

  // Chain rule through soft/hard rounding.
  for (int g = 0; g < model.cfg.latent_levels; ++g) {
    const auto& chain = state.chain.grids[g];
    const auto& dzg = dz.grids[g];
    auto& out = grads.z.grids[g];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += dzg[i] * chain[i];
  }

  LossBreakdown lb;
  lb.mse = mse_sum / (3.0 * static_cast<double>(pixels));
  lb.rate_bits = rate_bits;
  lb.loss = lb.mse + lambda * rate_bits / static_cast<double>(pixels);
  return lb;
}

}  // namespace lottery
