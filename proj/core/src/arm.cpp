#include "lottery/arm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "lottery/activation.hpp"
#include "lottery/parallel.hpp"

namespace lottery {

namespace {
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kScaleShift = 4.0;
constexpr double kScaleMin = 1e-2;
constexpr double kScaleMax = 150.0;
}  // namespace

std::vector<std::pair<int, int>> build_context_template(int context_size) {
  if (context_size < 1) throw std::invalid_argument("build_context_template: size must be >= 1");
  std::vector<std::pair<int, int>> offsets;
  auto sort_key = [](const std::pair<int, int>& o) {
    return std::make_tuple(o.first * o.first + o.second * o.second, -o.first, -o.second);
  };
  // Radius-3 causal window first; wider rings only when c exceeds its 24
  // offsets, appended in the same order so smaller templates stay prefixes.
  for (int radius = 3; static_cast<int>(offsets.size()) < context_size; ++radius) {
    std::vector<std::pair<int, int>> ring;
    for (int dy = -radius; dy <= 0; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const bool causal = dy < 0 || (dy == 0 && dx < 0);
        if (!causal) continue;
        if (radius > 3 && std::max(-dy, std::abs(dx)) < radius) continue;  // already emitted
        ring.emplace_back(dy, dx);
      }
    }
    std::sort(ring.begin(), ring.end(),
              [&](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
    offsets.insert(offsets.end(), ring.begin(), ring.end());
  }
  offsets.resize(context_size);
  return offsets;
}

void extract_context(std::span<const double> grid, int height, int width, int y, int x,
                     std::span<const std::pair<int, int>> offsets, std::span<double> out) {
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const int sy = y + offsets[i].first;
    const int sx = x + offsets[i].second;
    out[i] = (sy >= 0 && sy < height && sx >= 0 && sx < width)
                 ? grid[static_cast<std::size_t>(sy) * width + sx]
                 : 0.0;
  }
}

std::size_t ArmParams::param_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

std::vector<double> ArmParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  auto push = [&flat](const std::vector<double>& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  push(w1.a);
  push(b1);
  push(w2.a);
  push(b2);
  push(w3.a);
  push(b3);
  return flat;
}

void ArmParams::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count()) throw std::invalid_argument("ArmParams: size mismatch");
  std::size_t off = 0;
  auto pull = [&](std::vector<double>& v) {
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  };
  pull(w1.a);
  pull(b1);
  pull(w2.a);
  pull(b2);
  pull(w3.a);
  pull(b3);
}

ArmParams init_arm(int context_size, std::uint64_t seed) {
  if (context_size < 1) throw std::invalid_argument("init_arm: context size must be >= 1");
  ArmParams p;
  p.context_size = context_size;
  const int c = context_size;
  auto kaiming = [&](Matrix& m, const char* label) {
    Rng rng = derive_stream(seed, label);
    const double bound = std::sqrt(6.0 / c);
    for (double& v : m.a) v = rng.uniform(-bound, bound);
  };
  p.w1 = Matrix(c, c);
  kaiming(p.w1, "arm/w1");
  p.b1.assign(c, 0.0);
  p.w2 = Matrix(c, c);
  kaiming(p.w2, "arm/w2");
  p.b2.assign(c, 0.0);
  p.w3 = Matrix(2, c);
  kaiming(p.w3, "arm/w3");
  p.b3.assign(2, 0.0);
  return p;
}

void init_arm_tape(const ArmParams& params, ArmTape& tape) {
  const int c = params.context_size;
  tape.ctx.assign(c, 0.0);
  tape.pre1.assign(c, 0.0);
  tape.h1.assign(c, 0.0);
  tape.pre2.assign(c, 0.0);
  tape.h2.assign(c, 0.0);
  tape.deriv1.assign(c, 0.0);
  tape.deriv2.assign(c, 0.0);
  tape.d_h2.assign(c, 0.0);
  tape.d_pre2.assign(c, 0.0);
  tape.d_h1.assign(c, 0.0);
  tape.d_pre1.assign(c, 0.0);
}

ArmEval arm_eval_tape(std::span<const double> ctx, const ArmParams& params, ArmTape& tape,
                      bool with_derivs) {
  const int c = params.context_size;
  if (static_cast<int>(ctx.size()) != c)
    throw std::invalid_argument("arm_eval: context length mismatch");
  std::copy(ctx.begin(), ctx.end(), tape.ctx.begin());
  matvec(params.w1, ctx, tape.pre1);
  if (with_derivs) {
    for (int i = 0; i < c; ++i) {
      const ValueGrad g = gelu(tape.pre1[i] + params.b1[i]);
      tape.h1[i] = g.value;
      tape.deriv1[i] = g.deriv;
    }
  } else {
    for (int i = 0; i < c; ++i) tape.h1[i] = gelu_value(tape.pre1[i] + params.b1[i]);
  }
  matvec(params.w2, tape.h1, tape.pre2);
  if (with_derivs) {
    for (int i = 0; i < c; ++i) {
      const ValueGrad g = gelu(tape.pre2[i] + params.b2[i]);
      tape.h2[i] = g.value;
      tape.deriv2[i] = g.deriv;
    }
  } else {
    for (int i = 0; i < c; ++i) tape.h2[i] = gelu_value(tape.pre2[i] + params.b2[i]);
  }
  double out[2];
  matvec(params.w3, tape.h2, {out, 2});
  tape.mu = out[0] + params.b3[0];
  tape.raw_scale = out[1] + params.b3[1];
  if (!std::isfinite(tape.mu) || !std::isfinite(tape.raw_scale))
    throw std::runtime_error("arm_eval: non-finite output (training instability)");
  tape.scale = std::clamp(std::exp(tape.raw_scale - kScaleShift), kScaleMin, kScaleMax);
  return {tape.mu, tape.scale, tape.raw_scale};
}

ArmEval arm_eval(std::span<const double> ctx, const ArmParams& params) {
  thread_local ArmTape tape;
  if (static_cast<int>(tape.ctx.size()) != params.context_size) init_arm_tape(params, tape);
  return arm_eval_tape(ctx, params, tape);
}

ArmGrads::ArmGrads(const ArmParams& params)
    : w1(params.w1.rows, params.w1.cols),
      w2(params.w2.rows, params.w2.cols),
      w3(params.w3.rows, params.w3.cols),
      b1(params.b1.size(), 0.0),
      b2(params.b2.size(), 0.0),
      b3(params.b3.size(), 0.0) {}

void ArmGrads::add(const ArmGrads& other) {
  auto axpy = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  axpy(w1.a, other.w1.a);
  axpy(b1, other.b1);
  axpy(w2.a, other.w2.a);
  axpy(b2, other.b2);
  axpy(w3.a, other.w3.a);
  axpy(b3, other.b3);
}

std::vector<double> ArmGrads::flatten() const {
  std::vector<double> flat;
  auto push = [&flat](const std::vector<double>& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  push(w1.a);
  push(b1);
  push(w2.a);
  push(b2);
  push(w3.a);
  push(b3);
  return flat;
}

void arm_backward(const ArmParams& params, ArmTape& tape, double d_mu, double d_scale,
                  std::span<double> d_ctx, ArmGrads& grads) {
  const int c = params.context_size;
  const bool clip_active = tape.scale <= kScaleMin || tape.scale >= kScaleMax;
  const double d_raw = clip_active ? 0.0 : d_scale * tape.scale;

  grads.b3[0] += d_mu;
  grads.b3[1] += d_raw;
  for (int j = 0; j < c; ++j) {
    grads.w3.at(0, j) += d_mu * tape.h2[j];
    grads.w3.at(1, j) += d_raw * tape.h2[j];
    tape.d_h2[j] = params.w3.at(0, j) * d_mu + params.w3.at(1, j) * d_raw;
  }

  std::fill(tape.d_h1.begin(), tape.d_h1.end(), 0.0);
  for (int i = 0; i < c; ++i) tape.d_pre2[i] = tape.d_h2[i] * tape.deriv2[i];
  for (int i = 0; i < c; ++i) {
    const double g = tape.d_pre2[i];
    grads.b2[i] += g;
    double* wrow = grads.w2.row(i).data();
    const double* prow = params.w2.row(i).data();
    for (int j = 0; j < c; ++j) {
      wrow[j] += g * tape.h1[j];
      tape.d_h1[j] += prow[j] * g;
    }
  }

  for (int i = 0; i < c; ++i) tape.d_pre1[i] = tape.d_h1[i] * tape.deriv1[i];
  std::fill(d_ctx.begin(), d_ctx.end(), 0.0);
  for (int i = 0; i < c; ++i) {
    const double g = tape.d_pre1[i];
    grads.b1[i] += g;
    double* wrow = grads.w1.row(i).data();
    const double* prow = params.w1.row(i).data();
    for (int j = 0; j < c; ++j) {
      wrow[j] += g * tape.ctx[j];
      d_ctx[j] += prow[j] * g;
    }
  }
}

namespace {

// Log-space integrated Laplace. Returns ln P plus the ratios
// (dP/dz)/P, (dP/dmu)/P, (dP/db)/P, which stay finite deep in the tails.
struct LogPmf {
  double ln_p;
  double r_dz;
  double r_dmu;
  double r_db;
};

LogPmf laplace_log_pmf(double z, double mu, double b) {
  const double a1 = (z - 0.5 - mu) / b;
  const double a2 = (z + 0.5 - mu) / b;
  const double q = std::exp(-1.0 / b);        // e^{-1/b} < 1 since b <= 150
  const double one_minus_q = -std::expm1(-1.0 / b);

  LogPmf out{};
  if (a2 <= 0.0) {
    // Whole bin left of mu: P = 0.5 e^{a2} (1 - q).
    out.ln_p = std::log(0.5) + a2 + std::log(one_minus_q);
    out.r_dz = 1.0 / b;
    out.r_dmu = -1.0 / b;
    out.r_db = -(a2 - a1 * q) / (b * one_minus_q);
  } else if (a1 >= 0.0) {
    // Whole bin right of mu: P = 0.5 e^{-a1} (1 - q).
    out.ln_p = std::log(0.5) - a1 + std::log(one_minus_q);
    out.r_dz = -1.0 / b;
    out.r_dmu = 1.0 / b;
    out.r_db = (a1 - a2 * q) / (b * one_minus_q);
  } else {
    // Bin straddles mu: P = -0.5 expm1(a1) - 0.5 expm1(-a2).
    const double p = -0.5 * std::expm1(a1) - 0.5 * std::expm1(-a2);
    const double f1 = 0.5 / b * std::exp(a1);
    const double f2 = 0.5 / b * std::exp(-a2);
    out.ln_p = std::log(p);
    out.r_dz = (f2 - f1) / p;
    out.r_dmu = -out.r_dz;
    out.r_db = -(a2 * f2 - a1 * f1) / p;
  }
  return out;
}

}  // namespace

double laplace_integer_pmf(long k, double mu, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("laplace_integer_pmf: scale must be > 0");
  const double p = std::exp(laplace_log_pmf(static_cast<double>(k), mu, scale).ln_p);
  return std::max(p, std::numeric_limits<double>::denorm_min());
}

LaplaceBits laplace_bits(double z, double mu, double scale) {
  const LogPmf lp = laplace_log_pmf(z, mu, scale);
  LaplaceBits out;
  out.bits = -lp.ln_p / kLn2;
  out.d_dz = -lp.r_dz / kLn2;
  out.d_dmu = -lp.r_dmu / kLn2;
  out.d_dscale = -lp.r_db / kLn2;
  return out;
}

double latent_rate_bits(const LatentPyramid& values, const ArmParams& params,
                        std::span<const std::pair<int, int>> offsets) {
  const auto shapes = pyramid_shapes(values.height, values.width, values.levels());
  double total = 0.0;
  std::vector<double> ctx(params.context_size);
  ArmTape tape;
  init_arm_tape(params, tape);
  for (int g = 0; g < values.levels(); ++g) {
    const auto& grid = values.grids[g];
    const int h = shapes[g].height, w = shapes[g].width;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        extract_context(grid, h, w, y, x, offsets, ctx);
        const ArmEval eval = arm_eval_tape(ctx, params, tape);
        total += laplace_bits(grid[static_cast<std::size_t>(y) * w + x], eval.mu, eval.scale).bits;
      }
    }
  }
  return total;
}

}  // namespace lottery
