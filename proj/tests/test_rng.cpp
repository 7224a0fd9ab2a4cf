#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "lottery/activation.hpp"
#include "lottery/gradcheck.hpp"
#include "lottery/rng.hpp"

using namespace lottery;

namespace {
std::vector<std::uint64_t> draw(std::uint64_t seed, const char* label, int n) {
  Rng rng = derive_stream(seed, label);
  std::vector<std::uint64_t> out(n);
  for (auto& v : out) v = rng.next_u64();
  return out;
}
}  // namespace

TEST_CASE("same (seed, label) replays the identical stream") {
  CHECK(draw(42, "a", 100) == draw(42, "a", 100));
}

TEST_CASE("distinct labels and seeds give distinct streams") {
  CHECK(draw(42, "a", 100) != draw(42, "b", 100));
  CHECK(draw(42, "a", 100) != draw(43, "a", 100));
}

TEST_CASE("empty label is rejected") {
  CHECK_THROWS_AS(derive_stream(1, ""), std::invalid_argument);
}

TEST_CASE("uniform ranges") {
  Rng rng = derive_stream(7, "uniform");
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_open01();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    const double w = rng.uniform(-2.0, 3.0);
    CHECK(w >= -2.0);
    CHECK(w < 3.0);
  }
}

TEST_CASE("gelu fixed points and saturation") {
  CHECK(gelu(0.0).value == 0.0);
  CHECK(std::abs(gelu(10.0).value - 10.0) < 1e-9);
  // High-precision references for the exact-erf form.
  CHECK(gelu(0.7).value == doctest::Approx(0.53062544344384889).epsilon(1e-12));
  CHECK(gelu(0.7).deriv == doctest::Approx(0.97661410113365987).epsilon(1e-12));
}

TEST_CASE("gelu derivative matches central differences") {
  Rng rng = derive_stream(3, "gelu-fd");
  const double eps = 1e-5;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-5.0, 5.0);
    const double fd = (gelu_value(x + eps) - gelu_value(x - eps)) / (2.0 * eps);
    const double rel = std::abs(gelu(x).deriv - fd) / std::max(std::abs(gelu(x).deriv), 1e-8);
    CHECK(rel <= 1e-5);
  }
}

TEST_CASE("finite_diff_check on a quadratic") {
  std::vector<double> p{3.0};
  auto loss = [&p]() { return p[0] * p[0]; };
  const std::vector<double> grad{6.0};
  CHECK(finite_diff_check(p, loss, grad, 1e-4) <= 1e-6);
  CHECK(p[0] == 3.0);  // restored after probing
}

TEST_CASE("finite_diff_check on a constant loss reports zero error") {
  std::vector<double> p{1.0, -2.0};
  auto loss = []() { return 5.0; };
  const std::vector<double> grad{0.0, 0.0};
  CHECK(finite_diff_check(p, loss, grad, 1e-3) == 0.0);
}

TEST_CASE("finite_diff_check flags non-finite losses") {
  std::vector<double> p{0.5};
  auto loss = [&p]() { return std::log(-p[0]); };  // NaN everywhere near 0.5
  const std::vector<double> grad{0.0};
  CHECK_THROWS_AS(finite_diff_check(p, loss, grad, 1e-3), std::domain_error);
}
