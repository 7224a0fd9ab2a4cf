#include "lottery/supermask.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lottery/activation.hpp"

namespace lottery {

std::array<int, SuperMaskConfig::kLayers> SuperMaskConfig::in_dims() const {
  std::array<int, kLayers> dims{};
  dims[0] = 2;
  for (int i = 1; i < kLayers; ++i) dims[i] = kOutDims[i - 1] + mod_channels(i + 1);
  return dims;
}

int SuperMaskConfig::mod_channels(int index) const {
  if (index < 2 || index > kLayers) throw std::out_of_range("mod_channels: layer index");
  const int base = extra_convs > 0 ? 6 : 3;
  if (index == 2) return base;
  if (index == 3) return base + 3;
  return base + 3 + modnet_width;
}

std::int64_t SuperMaskNet::total_weights() const {
  std::int64_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::int64_t>(layer.weight_count());
  return n;
}

std::int64_t SuperMaskNet::active_count() const {
  std::int64_t n = 0;
  for (const auto& m : mask) n += std::count(m.begin(), m.end(), std::uint8_t{1});
  return n;
}

SuperMaskNet build_supermask_net(const SuperMaskConfig& cfg, const FourierConfig& fourier,
                                 std::uint64_t seed) {
  if (!(cfg.mask_ratio > 0.0 && cfg.mask_ratio <= 1.0))
    throw std::invalid_argument("SuperMask: mask_ratio must be in (0, 1]");
  SuperMaskNet net;
  net.cfg = cfg;
  net.fourier = fourier;
  const auto in = cfg.in_dims();
  for (int i = 0; i < SuperMaskConfig::kLayers; ++i)
    net.layers.push_back(build_layer(SuperMaskConfig::kOutDims[i], in[i], fourier, seed, i));
  refresh_mask(net);
  return net;
}

std::vector<std::vector<std::uint8_t>> compute_global_topk(
    const std::vector<std::span<const double>>& scores, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw std::invalid_argument("compute_global_topk: ratio must be in (0, 1]");
  std::int64_t total = 0;
  for (const auto& s : scores) total += static_cast<std::int64_t>(s.size());
  if (total == 0) throw std::invalid_argument("compute_global_topk: no weights");

  const std::int64_t keep = std::llround(ratio * static_cast<double>(total));

  struct Entry {
    double score;
    std::int32_t layer;
    std::int64_t index;
  };
  std::vector<Entry> order;
  order.reserve(total);
  for (std::size_t l = 0; l < scores.size(); ++l)
    for (std::size_t i = 0; i < scores[l].size(); ++i)
      order.push_back({scores[l][i], static_cast<std::int32_t>(l), static_cast<std::int64_t>(i)});

  auto better = [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.index < b.index;
  };
  if (keep > 0 && keep < total)
    std::nth_element(order.begin(), order.begin() + keep, order.end(), better);

  std::vector<std::vector<std::uint8_t>> mask(scores.size());
  for (std::size_t l = 0; l < scores.size(); ++l) mask[l].assign(scores[l].size(), 0);
  for (std::int64_t i = 0; i < keep; ++i) mask[order[i].layer][order[i].index] = 1;
  return mask;
}

namespace {

void materialize_masked(SuperMaskNet& net) {
  net.masked.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& w0 = net.layers[l].w0;
    Matrix& m = net.masked[l];
    m = Matrix(w0.rows, w0.cols);
    const auto& bits = net.mask[l];
    for (std::size_t i = 0; i < w0.size(); ++i) m.a[i] = bits[i] ? w0.a[i] : 0.0;
  }
}

}  // namespace

void refresh_mask(SuperMaskNet& net) {
  std::vector<std::span<const double>> scores;
  scores.reserve(net.layers.size());
  for (const auto& layer : net.layers) scores.push_back(layer.scores.a);
  net.mask = compute_global_topk(scores, net.cfg.mask_ratio);
  materialize_masked(net);
}

void install_mask(SuperMaskNet& net, std::vector<std::vector<std::uint8_t>> mask) {
  if (mask.size() != net.layers.size()) throw std::invalid_argument("install_mask: layer count");
  for (std::size_t l = 0; l < mask.size(); ++l)
    if (mask[l].size() != net.layers[l].weight_count())
      throw std::invalid_argument("install_mask: shape mismatch");
  net.mask = std::move(mask);
  materialize_masked(net);
}

void update_scores(SuperMaskNet& net, const std::vector<std::vector<double>>& score_grads,
                   double lr) {
  assert(score_grads.size() == net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& p = net.layers[l].scores.a;
    const auto& g = score_grads[l];
    assert(g.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  }
}

double normalized_coord(int r, int n) {
  return n > 1 ? 2.0 * r / (n - 1) - 1.0 : 0.0;
}

void init_tape(const SuperMaskNet& net, SynthTape& tape) {
  const auto in = net.cfg.in_dims();
  for (int i = 0; i < SuperMaskConfig::kLayers; ++i) {
    tape.input[i].assign(in[i], 0.0);
    tape.pre[i].assign(SuperMaskConfig::kOutDims[i], 0.0);
    tape.act_deriv[i].assign(SuperMaskConfig::kOutDims[i], 0.0);
    tape.d_pre[i].assign(SuperMaskConfig::kOutDims[i], 0.0);
    tape.d_input[i].assign(in[i], 0.0);
  }
}

void synth_forward_pixel(const SuperMaskNet& net, double coord_row, double coord_col,
                         const std::array<std::span<const double>, 3>& mods, SynthTape& tape) {
  tape.input[0][0] = coord_row;
  tape.input[0][1] = coord_col;
  for (int i = 0; i < SuperMaskConfig::kLayers; ++i) {
    if (i > 0) {
      const auto& mod = mods[i - 1];
      const int mc = net.cfg.mod_channels(i + 1);
      if (static_cast<int>(mod.size()) != mc)
        throw std::invalid_argument("synth_forward_pixel: modulation channels of layer " +
                                    std::to_string(i + 1) + " expected " + std::to_string(mc));
      std::copy(mod.begin(), mod.end(), tape.input[i].begin());
      const auto& prev_pre = tape.pre[i - 1];
      auto& deriv = tape.act_deriv[i - 1];
      for (std::size_t k = 0; k < prev_pre.size(); ++k) {
        const ValueGrad g = gelu(prev_pre[k]);
        tape.input[i][mod.size() + k] = g.value;
        deriv[k] = g.deriv;
      }
    }
    matvec(net.masked[i], tape.input[i], tape.pre[i]);
  }
  for (int k = 0; k < 3; ++k) tape.rgb[k] = 0.5 * (std::tanh(tape.pre[3][k]) + 1.0);
}

void synth_backward_pixel(const SuperMaskNet& net, SynthTape& tape,
                          std::span<const double> d_rgb,
                          const std::array<std::span<double>, 3>& d_mods,
                          std::vector<std::vector<double>>* score_grads,
                          std::vector<std::vector<double>>* weight_grads) {
  // Output mapping (tanh(pre)+1)/2.
  for (int k = 0; k < 3; ++k) {
    const double y = 2.0 * tape.rgb[k] - 1.0;  // tanh(pre)
    tape.d_pre[3][k] = d_rgb[k] * 0.5 * (1.0 - y * y);
  }

  for (int i = SuperMaskConfig::kLayers - 1; i >= 0; --i) {
    const Matrix& w0 = net.layers[i].w0;
    const Matrix& wm = net.masked[i];
    const auto& input = tape.input[i];
    const auto& dp = tape.d_pre[i];
    const int out_dim = w0.rows;
    const int in_dim = w0.cols;

    auto& d_input = tape.d_input[i];
    std::fill(d_input.begin(), d_input.end(), 0.0);
    double* sg = score_grads ? (*score_grads)[i].data() : nullptr;
    double* wg = weight_grads ? (*weight_grads)[i].data() : nullptr;
    const double* in = input.data();
    double* din = d_input.data();
    for (int k = 0; k < out_dim; ++k) {
      const double g = dp[k];
      const double* w0row = w0.row(k).data();
      const double* wmrow = wm.row(k).data();
      const std::size_t off = static_cast<std::size_t>(k) * in_dim;
      if (sg && !wg) {
        double* sgrow = sg + off;
        for (int j = 0; j < in_dim; ++j) {
          sgrow[j] += g * w0row[j] * in[j];
          din[j] += wmrow[j] * g;
        }
      } else {
        for (int j = 0; j < in_dim; ++j) {
          if (sg) sg[off + j] += g * w0row[j] * in[j];
          if (wg) wg[off + j] += g * in[j];
          din[j] += wmrow[j] * g;
        }
      }
    }

    if (i == 0) break;
    const int mc = net.cfg.mod_channels(i + 1);
    for (int j = 0; j < mc; ++j) d_mods[i - 1][j] = d_input[j];
    const auto& deriv = tape.act_deriv[i - 1];
    for (std::size_t k = 0; k < deriv.size(); ++k)
      tape.d_pre[i - 1][k] = d_input[mc + k] * deriv[k];
  }
}

}  // namespace lottery
