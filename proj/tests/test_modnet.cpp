#include <doctest.h>

#include <stdexcept>
#include <tuple>

#include <cmath>
#include <vector>

#include "lottery/activation.hpp"
#include "lottery/modnet.hpp"
#include "lottery/rng.hpp"

using namespace lottery;

TEST_CASE("pyramid shapes use per-level ceilings") {
  const auto even = pyramid_shapes(64, 64, 7);
  const int expect[7] = {64, 32, 16, 8, 4, 2, 1};
  for (int g = 0; g < 7; ++g) {
    CHECK(even[g].height == expect[g]);
    CHECK(even[g].width == expect[g]);
  }
  const auto odd = pyramid_shapes(5, 9, 4);
  CHECK(odd[1].height == 3);
  CHECK(odd[1].width == 5);
  CHECK(odd[2].height == 2);
  CHECK(odd[3].width == 2);

  LatentPyramid p(5, 9, 4);
  std::size_t expected_total = 0;
  for (const auto& s : odd) expected_total += s.size();
  CHECK(p.total_elements() == expected_total);
  for (const auto& g : p.grids)
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("constant grids upsample to constant channels") {
  LatentPyramid p(13, 11, 4);
  for (int g = 0; g < 4; ++g)
    for (double& v : p.grids[g]) v = 1.0 + g;
  const PixelGrid u0 = upsample_pyramid(p);
  for (int g = 0; g < 4; ++g)
    for (double v : u0.plane(g)) CHECK(v == doctest::Approx(1.0 + g).epsilon(1e-12));
}

TEST_CASE("full-resolution level passes through unchanged") {
  LatentPyramid p(6, 7, 2);
  Rng rng = derive_stream(1, "pass");
  for (double& v : p.grids[0]) v = rng.uniform(-2, 2);
  const PixelGrid u0 = upsample_pyramid(p);
  for (std::size_t i = 0; i < p.grids[0].size(); ++i) CHECK(u0.plane(0)[i] == p.grids[0][i]);
}

TEST_CASE("one doubling of a 2x2 impulse matches the 4-tap arithmetic") {
  LatentPyramid p(4, 4, 2);
  p.grids[1] = {1.0, 0.0, 0.0, 0.0};
  const PixelGrid u0 = upsample_pyramid(p);
  // Separable outer product of [0.75, 0.25, 0, 0] with replicate padding.
  const double expect[4][4] = {{0.5625, 0.1875, 0.0, 0.0},
                               {0.1875, 0.0625, 0.0, 0.0},
                               {0.0, 0.0, 0.0, 0.0},
                               {0.0, 0.0, 0.0, 0.0}};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(u0.at(1, y, x) == doctest::Approx(expect[y][x]).epsilon(1e-12));
}

TEST_CASE("upsample adjoint satisfies the inner-product identity") {
  // <A x, y> == <x, A^T y> for random x, y, including odd shapes.
  for (auto [h, w, levels] : {std::tuple{8, 8, 4}, std::tuple{7, 5, 3}, std::tuple{9, 16, 5}}) {
    Rng rng = derive_stream(h * 100 + w, "adjoint");
    LatentPyramid x(h, w, levels);
    for (auto& g : x.grids)
      for (double& v : g) v = rng.uniform(-1, 1);
    PixelGrid y(levels, h, w);
    for (double& v : y.values) v = rng.uniform(-1, 1);

    const PixelGrid ax = upsample_pyramid(x);
    const LatentPyramid aty = upsample_pyramid_adjoint(y, levels);

    double lhs = 0.0;
    for (std::size_t i = 0; i < ax.values.size(); ++i) lhs += ax.values[i] * y.values[i];
    double rhs = 0.0;
    for (int g = 0; g < levels; ++g)
      for (std::size_t i = 0; i < x.grids[g].size(); ++i) rhs += x.grids[g][i] * aty.grids[g][i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("modnet zero input with zero biases stays zero") {
  ModNetParams params = init_modnet(7, 8, 0, 3);
  PixelGrid u0(7, 4, 4);
  ModNetTape tape;
  modnet_forward(u0, params, tape);
  for (double v : tape.u1.values) CHECK(v == 0.0);
  for (double v : tape.u2.values) CHECK(v == 0.0);
  for (double v : tape.u3.values) CHECK(v == 0.0);
}

TEST_CASE("1x1 convolutions act as per-pixel matrix multiplies") {
  ModNetParams params = init_modnet(3, 2, 0, 5);
  Rng rng = derive_stream(5, "mm");
  for (double& b : params.bias1) b = rng.uniform(-0.2, 0.2);
  for (double& b : params.bias2) b = rng.uniform(-0.2, 0.2);
  for (double& b : params.bias3) b = rng.uniform(-0.2, 0.2);

  PixelGrid u0(3, 2, 2);
  for (double& v : u0.values) v = rng.uniform(-1, 1);
  ModNetTape tape;
  modnet_forward(u0, params, tape);

  // Independent per-pixel arithmetic.
  for (int p = 0; p < 4; ++p) {
    std::vector<double> in(3), u1(2), u2(3), u3(3);
    for (int c = 0; c < 3; ++c) in[c] = u0.values[c * 4 + p];
    for (int o = 0; o < 2; ++o) {
      double acc = params.bias1[o];
      for (int c = 0; c < 3; ++c) acc += params.conv1.at(o, c) * in[c];
      u1[o] = gelu_value(acc);
      CHECK(tape.u1.values[o * 4 + p] == doctest::Approx(u1[o]).epsilon(1e-12));
    }
    for (int o = 0; o < 3; ++o) {
      double acc = params.bias2[o];
      for (int c = 0; c < 2; ++c) acc += params.conv2.at(o, c) * u1[c];
      u2[o] = gelu_value(acc);
      CHECK(tape.u2.values[o * 4 + p] == doctest::Approx(u2[o]).epsilon(1e-12));
    }
    for (int o = 0; o < 3; ++o) {
      double acc = params.bias3[o];
      for (int c = 0; c < 3; ++c) acc += params.conv3.at(o, c) * u2[c];
      u3[o] = acc;
      CHECK(tape.u3.values[o * 4 + p] == doctest::Approx(u3[o]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rewind concatenation is deepest-first and prefix-extending") {
  ModNetParams params = init_modnet(7, 48, 0, 9);
  PixelGrid u0(7, 3, 3);
  Rng rng = derive_stream(2, "rewind");
  for (double& v : u0.values) v = rng.uniform(-1, 1);
  ModNetTape tape;
  modnet_forward(u0, params, tape);

  const PixelGrid m1 = rewind_concat(tape, 0, 1);
  const PixelGrid m2 = rewind_concat(tape, 0, 2);
  const PixelGrid m3 = rewind_concat(tape, 0, 3);
  CHECK(m1.channels == 3);
  CHECK(m2.channels == 6);
  CHECK(m3.channels == 6 + 48);
  CHECK(modulation_channels(3, 48, 0) == 54);

  // M1 equals U3; channel 0 of M2 equals channel 0 of U3.
  for (std::size_t i = 0; i < m1.values.size(); ++i) CHECK(m1.values[i] == tape.u3.values[i]);
  for (std::size_t i = 0; i < m1.plane_size(); ++i) CHECK(m2.plane(0)[i] == tape.u3.plane(0)[i]);
  // Prefix extension.
  for (int c = 0; c < m1.channels; ++c)
    for (std::size_t i = 0; i < m1.plane_size(); ++i) CHECK(m2.plane(c)[i] == m1.plane(c)[i]);
  for (int c = 0; c < m2.channels; ++c)
    for (std::size_t i = 0; i < m2.plane_size(); ++i) CHECK(m3.plane(c)[i] == m2.plane(c)[i]);

  CHECK_THROWS_AS(rewind_concat(tape, 0, 4), std::out_of_range);
}

TEST_CASE("improved variant appends a 3x3 conv output ahead of u3") {
  ModNetParams params = init_modnet(7, 16, 1, 13);
  PixelGrid u0(7, 5, 4);
  Rng rng = derive_stream(3, "extra");
  for (double& v : u0.values) v = rng.uniform(-1, 1);
  ModNetTape tape;
  modnet_forward(u0, params, tape);
  REQUIRE(tape.extra_out.size() == 1);

  const PixelGrid m1 = rewind_concat(tape, 1, 1);
  CHECK(m1.channels == 6);
  for (std::size_t i = 0; i < m1.plane_size(); ++i) {
    CHECK(m1.plane(0)[i] == tape.extra_out[0].plane(0)[i]);
    CHECK(m1.plane(3)[i] == tape.u3.plane(0)[i]);
  }
  CHECK(modulation_channels(1, 16, 1) == 6);
  CHECK(modulation_channels(3, 16, 1) == 9 + 16);
}

namespace {

double modnet_scalar_loss(const PixelGrid& u0, const ModNetParams& params,
                          const PixelGrid& weights_u1, const PixelGrid& weights_u3,
                          const PixelGrid& weights_extra) {
  ModNetTape tape;
  modnet_forward(u0, params, tape);
  double loss = 0.0;
  for (std::size_t i = 0; i < tape.u1.values.size(); ++i)
    loss += weights_u1.values[i] * tape.u1.values[i];
  for (std::size_t i = 0; i < tape.u3.values.size(); ++i)
    loss += weights_u3.values[i] * tape.u3.values[i];
  if (!tape.extra_out.empty())
    for (std::size_t i = 0; i < tape.extra_out.back().values.size(); ++i)
      loss += weights_extra.values[i] * tape.extra_out.back().values[i];
  return loss;
}

}  // namespace

TEST_CASE("modnet backward matches finite differences (including the 3x3 conv)") {
  const int h = 4, w = 4, L = 3, d = 3;
  for (int extra : {0, 1}) {
    ModNetParams params = init_modnet(L, d, extra, 21);
    Rng rng = derive_stream(31 + extra, "mn-fd");
    for (double& b : params.bias1) b = rng.uniform(-0.1, 0.1);
    for (double& b : params.bias2) b = rng.uniform(-0.1, 0.1);
    for (double& b : params.bias3) b = rng.uniform(-0.1, 0.1);

    PixelGrid u0(L, h, w);
    for (double& v : u0.values) v = rng.uniform(-1, 1);
    PixelGrid wu1(d, h, w), wu3(3, h, w), wextra(3, h, w);
    for (double& v : wu1.values) v = rng.uniform(-1, 1);
    for (double& v : wu3.values) v = rng.uniform(-1, 1);
    for (double& v : wextra.values) v = rng.uniform(-1, 1);

    // Analytic gradients.
    ModNetTape tape;
    modnet_forward(u0, params, tape);
    ModNetGrads grads(params);
    PixelGrid d_u2(3, h, w);
    std::vector<PixelGrid> d_extra(extra, PixelGrid(3, h, w));
    if (extra) d_extra[0] = wextra;
    const PixelGrid d_u0 =
        modnet_backward(u0, params, tape, wu1, d_u2, wu3, std::move(d_extra), grads);

    // Finite differences over the parameters.
    std::vector<double> flat = params.flatten();
    const std::vector<double> analytic = grads.flatten();
    const double eps = 1e-6;
    ModNetParams probe = params;
    for (std::size_t i = 0; i < flat.size(); i += 7) {  // probe a spread of coordinates
      const double saved = flat[i];
      flat[i] = saved + eps;
      probe.unflatten(flat);
      const double up = modnet_scalar_loss(u0, probe, wu1, wu3, wextra);
      flat[i] = saved - eps;
      probe.unflatten(flat);
      const double down = modnet_scalar_loss(u0, probe, wu1, wu3, wextra);
      flat[i] = saved;
      const double fd = (up - down) / (2 * eps);
      CHECK(analytic[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    probe.unflatten(flat);

    // Finite differences over u0.
    PixelGrid u0_probe = u0;
    for (std::size_t i = 0; i < u0.values.size(); i += 5) {
      const double saved = u0_probe.values[i];
      u0_probe.values[i] = saved + eps;
      const double up = modnet_scalar_loss(u0_probe, params, wu1, wu3, wextra);
      u0_probe.values[i] = saved - eps;
      const double down = modnet_scalar_loss(u0_probe, params, wu1, wu3, wextra);
      u0_probe.values[i] = saved;
      CHECK(d_u0.values[i] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));
    }
  }
}
