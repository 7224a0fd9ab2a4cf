#include <doctest.h>

#include <stdexcept>
#include <tuple>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "lottery/arm.hpp"

using namespace lottery;

TEST_CASE("context template obeys the sorted-offset rule") {
  const auto t4 = build_context_template(4);
  const std::vector<std::pair<int, int>> expect4{{0, -1}, {-1, 0}, {-1, 1}, {-1, -1}};
  CHECK(t4 == expect4);

  // Independent enumeration of the radius-3 window for c = 24.
  const auto t24 = build_context_template(24);
  std::vector<std::pair<int, int>> window;
  for (int dy = -3; dy <= 0; ++dy)
    for (int dx = -3; dx <= 3; ++dx)
      if (dy < 0 || (dy == 0 && dx < 0)) window.emplace_back(dy, dx);
  std::sort(window.begin(), window.end(), [](const auto& a, const auto& b) {
    const auto key = [](const std::pair<int, int>& o) {
      return std::make_tuple(o.first * o.first + o.second * o.second, -o.first, -o.second);
    };
    return key(a) < key(b);
  });
  CHECK(t24 == window);

  // c = 32 keeps the radius-3 prefix and extends causally without repeats.
  const auto t32 = build_context_template(32);
  CHECK(t32.size() == 32);
  for (int i = 0; i < 24; ++i) CHECK(t32[i] == t24[i]);
  std::set<std::pair<int, int>> unique(t32.begin(), t32.end());
  CHECK(unique.size() == 32);
  for (const auto& [dy, dx] : t32) CHECK((dy < 0 || (dy == 0 && dx < 0)));
}

TEST_CASE("context extraction is causal with zero padding") {
  // 3x3 grid with distinct values 1..9.
  const std::vector<double> grid{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto t4 = build_context_template(4);
  std::vector<double> ctx(4);

  extract_context(grid, 3, 3, 0, 0, t4, ctx);
  CHECK(ctx == std::vector<double>{0, 0, 0, 0});

  // Center (1,1): offsets (0,-1)->4, (-1,0)->2, (-1,1)->3, (-1,-1)->1.
  extract_context(grid, 3, 3, 1, 1, t4, ctx);
  CHECK(ctx == std::vector<double>{4, 2, 3, 1});

  const std::vector<double> constant(9, 3.0);
  extract_context(constant, 3, 3, 1, 1, t4, ctx);
  CHECK(ctx == std::vector<double>{3, 3, 3, 3});
}

namespace {

ArmParams zero_arm(int c) {
  ArmParams p = init_arm(c, 0);
  std::vector<double> zeros(p.param_count(), 0.0);
  p.unflatten(zeros);
  return p;
}

}  // namespace

TEST_CASE("arm_eval scale mapping and clipping") {
  ArmParams p = zero_arm(8);
  std::vector<double> ctx(8, 0.0);

  ArmEval eval = arm_eval(ctx, p);
  CHECK(eval.mu == 0.0);
  CHECK(eval.scale == doctest::Approx(std::exp(-4.0)).epsilon(1e-12));

  p.b3[1] = 4.0;  // raw log-scale 4 -> scale 1
  eval = arm_eval(ctx, p);
  CHECK(eval.scale == doctest::Approx(1.0).epsilon(1e-12));

  p.b3[1] = -100.0;
  eval = arm_eval(ctx, p);
  CHECK(eval.scale == 1e-2);

  p.b3[1] = 100.0;
  eval = arm_eval(ctx, p);
  CHECK(eval.scale == 150.0);
}

TEST_CASE("integrated Laplace pmf") {
  CHECK(laplace_integer_pmf(0, 0.0, 1.0) ==
        doctest::Approx(0.39346934028736658).epsilon(1e-9));
  for (int k = 1; k <= 20; ++k)
    CHECK(laplace_integer_pmf(k, 0.0, 1.0) ==
          doctest::Approx(laplace_integer_pmf(-k, 0.0, 1.0)).epsilon(1e-13));

  double total = 0.0;
  for (int k = -50; k <= 50; ++k) total += laplace_integer_pmf(k, 0.0, 1.0);
  CHECK(total >= 1.0 - 1e-6);
  CHECK(total <= 1.0 + 1e-12);

  // Deep tails stay strictly positive.
  CHECK(laplace_integer_pmf(0, 100.0, 1e-2) > 0.0);
  CHECK(laplace_integer_pmf(5000, 0.0, 1e-2) > 0.0);
}

TEST_CASE("laplace_bits derivatives match finite differences") {
  const double eps = 1e-6;
  for (auto [z, mu, b] : {std::tuple{0.2, -0.3, 0.8}, std::tuple{3.7, 0.1, 2.5},
                          std::tuple{-6.0, 0.4, 0.05}, std::tuple{0.0, 12.0, 1.3}}) {
    const LaplaceBits lb = laplace_bits(z, mu, b);
    const double fd_z = (laplace_bits(z + eps, mu, b).bits - laplace_bits(z - eps, mu, b).bits) / (2 * eps);
    const double fd_mu =
        (laplace_bits(z, mu + eps, b).bits - laplace_bits(z, mu - eps, b).bits) / (2 * eps);
    const double fd_b =
        (laplace_bits(z, mu, b + eps).bits - laplace_bits(z, mu, b - eps).bits) / (2 * eps);
    CHECK(lb.d_dz == doctest::Approx(fd_z).epsilon(1e-5));
    CHECK(lb.d_dmu == doctest::Approx(fd_mu).epsilon(1e-5));
    CHECK(lb.d_dscale == doctest::Approx(fd_b).epsilon(1e-5));
  }
}

TEST_CASE("constant-model rate on an all-zero pyramid") {
  const ArmParams p = zero_arm(8);
  const auto offsets = build_context_template(8);
  LatentPyramid z(8, 8, 3);
  const double rate = latent_rate_bits(z, p, offsets);

  // Independent arithmetic: P(0) under Laplace(0, e^-4) is 1 - e^{-1/(2b)}.
  const double b = std::exp(-4.0);
  const double p0 = -std::expm1(-0.5 / b);
  const double expect = -std::log2(p0) * static_cast<double>(z.total_elements());
  CHECK(rate == doctest::Approx(expect).epsilon(1e-9));

  // A single element with probability one half costs one bit.
  CHECK(-std::log2(0.5) == 1.0);
}

TEST_CASE("raster causality: later positions never affect earlier probabilities") {
  const int c = 8;
  ArmParams p = init_arm(c, 3);
  const auto offsets = build_context_template(c);
  Rng rng = derive_stream(6, "causal");

  const int h = 6, w = 6;
  std::vector<double> grid(h * w);
  for (double& v : grid) v = std::floor(rng.uniform(-4, 5));

  auto element_bits = [&](const std::vector<double>& g) {
    std::vector<double> bits;
    std::vector<double> ctx(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        extract_context(g, h, w, y, x, offsets, ctx);
        const ArmEval eval = arm_eval(ctx, p);
        bits.push_back(laplace_bits(g[y * w + x], eval.mu, eval.scale).bits);
      }
    }
    return bits;
  };

  const auto before = element_bits(grid);
  const int qy = 3, qx = 4, q = qy * w + qx;
  std::vector<double> perturbed = grid;
  perturbed[q] += 2.0;
  const auto after = element_bits(perturbed);
  for (int e = 0; e < q; ++e) CHECK(before[e] == after[e]);
}
