#include "lottery/modnet.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lottery/activation.hpp"
#include "lottery/parallel.hpp"

namespace lottery {

namespace {
constexpr std::int64_t kPixelChunk = 4096;
}

std::vector<GridShape> pyramid_shapes(int height, int width, int levels) {
  if (height < 1 || width < 1 || levels < 1)
    throw std::invalid_argument("pyramid_shapes: invalid dimensions");
  std::vector<GridShape> shapes(levels);
  for (int g = 0; g < levels; ++g) {
    const int f = 1 << g;
    shapes[g] = {(height + f - 1) / f, (width + f - 1) / f};
  }
  return shapes;
}

LatentPyramid::LatentPyramid(int h, int w, int levels) : height(h), width(w) {
  const auto shapes = pyramid_shapes(h, w, levels);
  grids.resize(levels);
  for (int g = 0; g < levels; ++g) grids[g].assign(shapes[g].size(), 0.0);
}

std::size_t LatentPyramid::total_elements() const {
  std::size_t n = 0;
  for (const auto& g : grids) n += g.size();
  return n;
}

void upsample_axis(std::span<const double> in, std::span<double> out) {
  const int n = static_cast<int>(in.size());
  assert(static_cast<int>(out.size()) == 2 * n);
  for (int j = 0; j < n; ++j) {
    const double a = in[j];
    const double b = in[j + 1 < n ? j + 1 : n - 1];
    out[2 * j] = 0.75 * a + 0.25 * b;
    out[2 * j + 1] = 0.25 * a + 0.75 * b;
  }
}

namespace {

// One doubling step (h, w) -> (th, tw) with th <= 2h, tw <= 2w.
std::vector<double> upsample_step(const std::vector<double>& in, int h, int w, int th, int tw) {
  std::vector<double> horiz(static_cast<std::size_t>(h) * 2 * w);
  for (int y = 0; y < h; ++y)
    upsample_axis({in.data() + static_cast<std::size_t>(y) * w, static_cast<std::size_t>(w)},
                  {horiz.data() + static_cast<std::size_t>(y) * 2 * w, static_cast<std::size_t>(2) * w});

  std::vector<double> out(static_cast<std::size_t>(th) * tw);
  std::vector<double> col(h), ucol(2 * h);
  for (int x = 0; x < tw; ++x) {
    for (int y = 0; y < h; ++y) col[y] = horiz[static_cast<std::size_t>(y) * 2 * w + x];
    upsample_axis(col, ucol);
    for (int y = 0; y < th; ++y) out[static_cast<std::size_t>(y) * tw + x] = ucol[y];
  }
  return out;
}

std::vector<double> upsample_step_adjoint(const std::vector<double>& d_out, int h, int w,
                                          int th, int tw) {
  // Vertical adjoint into the h x 2w intermediate, then horizontal adjoint.
  std::vector<double> d_horiz(static_cast<std::size_t>(h) * 2 * w, 0.0);
  for (int x = 0; x < tw; ++x) {
    for (int j = 0; j < h; ++j) {
      const double g0 = 2 * j < th ? d_out[static_cast<std::size_t>(2 * j) * tw + x] : 0.0;
      const double g1 = 2 * j + 1 < th ? d_out[static_cast<std::size_t>(2 * j + 1) * tw + x] : 0.0;
      d_horiz[static_cast<std::size_t>(j) * 2 * w + x] += 0.75 * g0 + 0.25 * g1;
      const int jp = j + 1 < h ? j + 1 : h - 1;
      d_horiz[static_cast<std::size_t>(jp) * 2 * w + x] += 0.25 * g0 + 0.75 * g1;
    }
  }
  std::vector<double> d_in(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = d_horiz.data() + static_cast<std::size_t>(y) * 2 * w;
    double* drow = d_in.data() + static_cast<std::size_t>(y) * w;
    for (int j = 0; j < w; ++j) {
      const double g0 = row[2 * j];
      const double g1 = row[2 * j + 1];
      drow[j] += 0.75 * g0 + 0.25 * g1;
      const int jp = j + 1 < w ? j + 1 : w - 1;
      drow[jp] += 0.25 * g0 + 0.75 * g1;
    }
  }
  return d_in;
}

}  // namespace

std::int64_t upsample_mult_count(int height, int width, int levels) {
  const auto shapes = pyramid_shapes(height, width, levels);
  std::int64_t total = 0;
  for (int g = 1; g < levels; ++g) {
    for (int k = g; k > 0; --k) {
      const std::int64_t h = shapes[k].height, w = shapes[k].width;
      total += h * 2 * w * 2;                    // horizontal pass
      total += shapes[k - 1].width * 2 * h * 2;  // vertical pass over kept columns
    }
  }
  return total;
}

PixelGrid upsample_pyramid(const LatentPyramid& pyramid) {
  const int levels = pyramid.levels();
  const auto shapes = pyramid_shapes(pyramid.height, pyramid.width, levels);
  PixelGrid u0(levels, pyramid.height, pyramid.width);
  for (int g = 0; g < levels; ++g) {
    std::vector<double> cur = pyramid.grids[g];
    for (int k = g; k > 0; --k)
      cur = upsample_step(cur, shapes[k].height, shapes[k].width, shapes[k - 1].height,
                          shapes[k - 1].width);
    std::copy(cur.begin(), cur.end(), u0.plane(g).begin());
  }
  return u0;
}

LatentPyramid upsample_pyramid_adjoint(const PixelGrid& d_u0, int levels) {
  const auto shapes = pyramid_shapes(d_u0.height, d_u0.width, levels);
  LatentPyramid grads(d_u0.height, d_u0.width, levels);
  for (int g = 0; g < levels; ++g) {
    auto plane = d_u0.plane(g);
    std::vector<double> cur(plane.begin(), plane.end());
    for (int k = 1; k <= g; ++k)
      cur = upsample_step_adjoint(cur, shapes[k].height, shapes[k].width, shapes[k - 1].height,
                                  shapes[k - 1].width);
    grads.grids[g] = std::move(cur);
  }
  return grads;
}

std::size_t ModNetParams::param_count() const {
  std::size_t n = conv1.size() + bias1.size() + conv2.size() + bias2.size() + conv3.size() +
                  bias3.size();
  for (const auto& m : extra) n += m.size();
  for (const auto& b : extra_bias) n += b.size();
  return n;
}

std::vector<double> ModNetParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  auto push = [&flat](const std::vector<double>& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  push(conv1.a);
  push(bias1);
  push(conv2.a);
  push(bias2);
  push(conv3.a);
  push(bias3);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    push(extra[i].a);
    push(extra_bias[i]);
  }
  return flat;
}

void ModNetParams::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count()) throw std::invalid_argument("ModNetParams: size mismatch");
  std::size_t off = 0;
  auto pull = [&](std::vector<double>& v) {
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  };
  pull(conv1.a);
  pull(bias1);
  pull(conv2.a);
  pull(bias2);
  pull(conv3.a);
  pull(bias3);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    pull(extra[i].a);
    pull(extra_bias[i]);
  }
}

ModNetParams init_modnet(int latent_count, int width, int extra_convs, std::uint64_t seed) {
  if (latent_count < 1 || width < 1 || extra_convs < 0 || extra_convs > 2)
    throw std::invalid_argument("init_modnet: invalid configuration");
  ModNetParams p;
  p.latent_count = latent_count;
  p.width = width;
  p.extra_convs = extra_convs;

  auto kaiming = [&](Matrix& m, int fan_in, const std::string& label) {
    Rng rng = derive_stream(seed, label);
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : m.a) v = rng.uniform(-bound, bound);
  };

  p.conv1 = Matrix(width, latent_count);
  kaiming(p.conv1, latent_count, "modnet/conv1");
  p.bias1.assign(width, 0.0);
  p.conv2 = Matrix(3, width);
  kaiming(p.conv2, width, "modnet/conv2");
  p.bias2.assign(3, 0.0);
  p.conv3 = Matrix(3, 3);
  kaiming(p.conv3, 3, "modnet/conv3");
  p.bias3.assign(3, 0.0);
  for (int e = 0; e < extra_convs; ++e) {
    Matrix m(3, 27);
    kaiming(m, 27, "modnet/extra" + std::to_string(e));
    p.extra.push_back(std::move(m));
    p.extra_bias.emplace_back(3, 0.0);
  }
  return p;
}

namespace {

// 3x3 convolution with replicate padding, channels 3 -> 3.
void conv3x3_forward(const PixelGrid& in, const Matrix& weights, const std::vector<double>& bias,
                     PixelGrid& out) {
  const int h = in.height, w = in.width;
  for (int o = 0; o < 3; ++o) {
    const double* wk = weights.row(o).data();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = bias[o];
        for (int i = 0; i < 3; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = std::clamp(y + ky - 1, 0, h - 1);
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = std::clamp(x + kx - 1, 0, w - 1);
              acc += wk[i * 9 + ky * 3 + kx] * in.at(i, sy, sx);
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
}

void conv3x3_backward(const PixelGrid& in, const Matrix& weights, const PixelGrid& d_out,
                      PixelGrid& d_in, Matrix& d_weights, std::vector<double>& d_bias) {
  const int h = in.height, w = in.width;
  for (int o = 0; o < 3; ++o) {
    const double* wk = weights.row(o).data();
    double* dwk = d_weights.row(o).data();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = d_out.at(o, y, x);
        if (g == 0.0) continue;
        d_bias[o] += g;
        for (int i = 0; i < 3; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = std::clamp(y + ky - 1, 0, h - 1);
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = std::clamp(x + kx - 1, 0, w - 1);
              const double v = in.at(i, sy, sx);
              dwk[i * 9 + ky * 3 + kx] += g * v;
              d_in.at(i, sy, sx) += g * wk[i * 9 + ky * 3 + kx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

void modnet_forward(const PixelGrid& u0, const ModNetParams& params, ModNetTape& tape) {
  if (u0.channels != params.latent_count)
    throw std::invalid_argument("modnet_forward: u0 has " + std::to_string(u0.channels) +
                                " channels, conv1 expects " + std::to_string(params.latent_count));
  const int h = u0.height, w = u0.width;
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;
  const int d = params.width;
  const int L = params.latent_count;

  tape.u1 = PixelGrid(d, h, w);
  tape.u2 = PixelGrid(3, h, w);
  tape.u3 = PixelGrid(3, h, w);
  tape.deriv1 = PixelGrid(d, h, w);
  tape.deriv2 = PixelGrid(3, h, w);

  parallel_chunks(pixels, kPixelChunk, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
    std::vector<double> in(L), mid(std::max(d, 3)), v3(3);
    for (std::int64_t p = begin; p < end; ++p) {
      for (int c = 0; c < L; ++c) in[c] = u0.values[c * pixels + p];
      matvec(params.conv1, in, {mid.data(), static_cast<std::size_t>(d)});
      for (int c = 0; c < d; ++c) {
        const ValueGrad g = gelu(mid[c] + params.bias1[c]);
        tape.u1.values[c * pixels + p] = g.value;
        tape.deriv1.values[c * pixels + p] = g.deriv;
      }
      for (int c = 0; c < d; ++c) mid[c] = tape.u1.values[c * pixels + p];
      matvec(params.conv2, {mid.data(), static_cast<std::size_t>(d)}, v3);
      for (int c = 0; c < 3; ++c) {
        const ValueGrad g = gelu(v3[c] + params.bias2[c]);
        tape.u2.values[c * pixels + p] = g.value;
        tape.deriv2.values[c * pixels + p] = g.deriv;
      }
      for (int c = 0; c < 3; ++c) mid[c] = tape.u2.values[c * pixels + p];
      matvec(params.conv3, {mid.data(), 3}, v3);
      for (int c = 0; c < 3; ++c) tape.u3.values[c * pixels + p] = v3[c] + params.bias3[c];
    }
  });

  tape.extra_out.clear();
  tape.extra_deriv.clear();
  const PixelGrid* prev = &tape.u3;
  for (int e = 0; e < params.extra_convs; ++e) {
    PixelGrid activated(3, h, w);
    PixelGrid deriv(3, h, w);
    for (std::size_t i = 0; i < prev->values.size(); ++i) {
      const ValueGrad g = gelu(prev->values[i]);
      activated.values[i] = g.value;
      deriv.values[i] = g.deriv;
    }
    tape.extra_deriv.push_back(std::move(deriv));
    PixelGrid out(3, h, w);
    conv3x3_forward(activated, params.extra[e], params.extra_bias[e], out);
    tape.extra_out.push_back(std::move(out));
    prev = &tape.extra_out.back();
  }
}

ModNetGrads::ModNetGrads(const ModNetParams& params)
    : conv1(params.conv1.rows, params.conv1.cols),
      bias1(params.bias1.size(), 0.0),
      conv2(params.conv2.rows, params.conv2.cols),
      bias2(params.bias2.size(), 0.0),
      conv3(params.conv3.rows, params.conv3.cols),
      bias3(params.bias3.size(), 0.0) {
  for (const auto& m : params.extra) extra.emplace_back(m.rows, m.cols);
  for (const auto& b : params.extra_bias) extra_bias.emplace_back(b.size(), 0.0);
}

void ModNetGrads::add(const ModNetGrads& other) {
  auto axpy = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  axpy(conv1.a, other.conv1.a);
  axpy(bias1, other.bias1);
  axpy(conv2.a, other.conv2.a);
  axpy(bias2, other.bias2);
  axpy(conv3.a, other.conv3.a);
  axpy(bias3, other.bias3);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    axpy(extra[i].a, other.extra[i].a);
    axpy(extra_bias[i], other.extra_bias[i]);
  }
}

std::vector<double> ModNetGrads::flatten() const {
  std::vector<double> flat;
  auto push = [&flat](const std::vector<double>& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  push(conv1.a);
  push(bias1);
  push(conv2.a);
  push(bias2);
  push(conv3.a);
  push(bias3);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    push(extra[i].a);
    push(extra_bias[i]);
  }
  return flat;
}

PixelGrid modnet_backward(const PixelGrid& u0, const ModNetParams& params,
                          const ModNetTape& tape, const PixelGrid& d_u1,
                          const PixelGrid& d_u2, PixelGrid d_u3,
                          std::vector<PixelGrid> d_extra, ModNetGrads& grads) {
  const int h = u0.height, w = u0.width;
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;
  const int d = params.width;
  const int L = params.latent_count;

  // Chain the extra 3x3 convolutions back into d_u3.
  for (int e = params.extra_convs - 1; e >= 0; --e) {
    const PixelGrid& conv_in_pre = e == 0 ? tape.u3 : tape.extra_out[e - 1];
    PixelGrid activated(3, h, w);
    for (std::size_t i = 0; i < conv_in_pre.values.size(); ++i)
      activated.values[i] = gelu_value(conv_in_pre.values[i]);
    PixelGrid d_activated(3, h, w);
    conv3x3_backward(activated, params.extra[e], d_extra[e], d_activated, grads.extra[e],
                     grads.extra_bias[e]);
    PixelGrid& sink = e == 0 ? d_u3 : d_extra[e - 1];
    for (std::size_t i = 0; i < sink.values.size(); ++i)
      sink.values[i] += tape.extra_deriv[e].values[i] * d_activated.values[i];
  }

  PixelGrid d_u0(L, h, w);
  const std::int64_t chunks = chunk_count(pixels, kPixelChunk);
  std::vector<ModNetGrads> partial(chunks, ModNetGrads(params));

  parallel_chunks(pixels, kPixelChunk, [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
    ModNetGrads& g = partial[chunk];
    std::vector<double> in(L), u1(d), dv3(3), dmid(d);
    for (std::int64_t p = begin; p < end; ++p) {
      for (int c = 0; c < L; ++c) in[c] = u0.values[c * pixels + p];
      for (int c = 0; c < d; ++c) u1[c] = tape.u1.values[c * pixels + p];

      // conv3 (no activation): d_u3 -> grads + d(u2)
      for (int c = 0; c < 3; ++c) dv3[c] = d_u3.values[c * pixels + p];
      std::array<double, 3> u2pix;
      for (int c = 0; c < 3; ++c) u2pix[c] = tape.u2.values[c * pixels + p];
      std::array<double, 3> du2pix{};
      for (int o = 0; o < 3; ++o) {
        g.bias3[o] += dv3[o];
        for (int c = 0; c < 3; ++c) {
          g.conv3.at(o, c) += dv3[o] * u2pix[c];
          du2pix[c] += params.conv3.at(o, c) * dv3[o];
        }
      }
      for (int c = 0; c < 3; ++c) du2pix[c] += d_u2.values[c * pixels + p];

      // conv2 through the taped gelu derivative.
      std::fill(dmid.begin(), dmid.end(), 0.0);
      for (int o = 0; o < 3; ++o) {
        const double dpre2 = du2pix[o] * tape.deriv2.values[o * pixels + p];
        g.bias2[o] += dpre2;
        for (int c = 0; c < d; ++c) {
          g.conv2.at(o, c) += dpre2 * u1[c];
          dmid[c] += params.conv2.at(o, c) * dpre2;
        }
      }
      for (int c = 0; c < d; ++c) dmid[c] += d_u1.values[c * pixels + p];

      // conv1 through the taped gelu derivative.
      for (int o = 0; o < d; ++o) {
        const double dpre1 = dmid[o] * tape.deriv1.values[o * pixels + p];
        g.bias1[o] += dpre1;
        for (int c = 0; c < L; ++c) {
          g.conv1.at(o, c) += dpre1 * in[c];
          d_u0.values[c * pixels + p] += params.conv1.at(o, c) * dpre1;
        }
      }
    }
  });

  for (const auto& g : partial) grads.add(g);
  return d_u0;
}

std::vector<const PixelGrid*> modulation_sources(const ModNetTape& tape, int extra_convs) {
  std::vector<const PixelGrid*> sources;
  if (extra_convs > 0) sources.push_back(&tape.extra_out.back());
  sources.push_back(&tape.u3);
  sources.push_back(&tape.u2);
  sources.push_back(&tape.u1);
  return sources;
}

int modulation_channels(int index, int width, int extra_convs) {
  if (index < 1 || index > 3) throw std::out_of_range("modulation index must be in 1..3");
  const int base = extra_convs > 0 ? 6 : 3;       // M1
  if (index == 1) return base;
  if (index == 2) return base + 3;                // + u2
  return base + 3 + width;                        // + u2 + u1
}

PixelGrid rewind_concat(const ModNetTape& tape, int extra_convs, int index) {
  auto sources = modulation_sources(tape, extra_convs);
  const int take = index + (extra_convs > 0 ? 1 : 0);
  if (index < 1 || index > 3) throw std::out_of_range("rewind_concat: index must be in 1..3");
  int channels = 0;
  for (int s = 0; s < take; ++s) channels += sources[s]->channels;
  PixelGrid m(channels, tape.u3.height, tape.u3.width);
  int at = 0;
  for (int s = 0; s < take; ++s) {
    for (int c = 0; c < sources[s]->channels; ++c, ++at)
      std::copy(sources[s]->plane(c).begin(), sources[s]->plane(c).end(), m.plane(at).begin());
  }
  return m;
}

}  // namespace lottery
