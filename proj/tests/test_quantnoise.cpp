#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lottery/quantnoise.hpp"
#include "lottery/rng.hpp"

using namespace lottery;

TEST_CASE("soft rounding fixes integers exactly") {
  for (double t : {0.3, 0.1, 1e-2, 1e-4})
    for (int k = -5; k <= 5; ++k) CHECK(soft_round(double(k), t).value == double(k));
}

TEST_CASE("soft rounding closed-form values") {
  // mpmath references.
  CHECK(soft_round(0.3, 0.3).value == doctest::Approx(0.18704922604016764).epsilon(1e-12));
  CHECK(soft_round(1.7, 0.2).value == doctest::Approx(1.8859634699105444).epsilon(1e-12));
  CHECK(soft_round(-0.4, 0.15).value == doctest::Approx(-0.20786591297482610).epsilon(1e-12));
}

TEST_CASE("soft rounding approaches hard rounding at T = 1e-4") {
  CHECK(std::abs(soft_round(0.3, 1e-4).value - 0.0) <= 1e-3);
  Rng rng = derive_stream(1, "limit");
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double z = rng.uniform(-8.0, 8.0);
    const double frac = z - std::floor(z);
    if (std::abs(frac - 0.5) < 0.01) continue;  // stay off the half-integer boundary
    worst = std::max(worst, std::abs(soft_round(z, 1e-4).value - hard_round(z)));
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("soft rounding is strictly increasing within a cell") {
  for (int k : {-2, 0, 3}) {
    double prev = soft_round(k - 0.5 + 1e-6, 0.25).value;
    for (int i = 1; i <= 200; ++i) {
      const double z = k - 0.5 + 1e-6 + (1.0 - 2e-6) * i / 200.0;
      const double v = soft_round(z, 0.25).value;
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("soft rounding derivative matches finite differences") {
  Rng rng = derive_stream(2, "sr-fd");
  for (int i = 0; i < 300; ++i) {
    const double z = rng.uniform(-3.0, 3.0);
    const double frac = z - std::floor(z);
    if (frac < 1e-3 || frac > 1.0 - 1e-3) continue;  // floor() kink
    for (double t : {0.3, 0.15}) {
      const double eps = 1e-6;
      const double fd = (soft_round(z + eps, t).value - soft_round(z - eps, t).value) / (2 * eps);
      CHECK(soft_round(z, t).deriv == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("soft rounding rejects non-positive temperatures") {
  CHECK_THROWS_AS(soft_round(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("Kumaraswamy shape ties b to a through the mode constraint") {
  CHECK(kumaraswamy_shape_b(1.0) == doctest::Approx(1.0));
  CHECK(kumaraswamy_shape_b(2.0) == doctest::Approx(2.5));
  CHECK_THROWS_AS(kumaraswamy_shape_b(0.5), std::invalid_argument);
}

TEST_CASE("Kumaraswamy noise support and uniform endpoint") {
  for (double a : {1.0, 1.5, 2.0}) {
    Rng rng = derive_stream(42, "kuma");
    for (int i = 0; i < 10000; ++i) {
      const double u = kumaraswamy_noise(a, rng);
      CHECK(u > -0.5);
      CHECK(u < 0.5);
    }
  }

  // KS test against the uniform CDF at a = 1; critical value at
  // significance 0.01 for n = 10^4 is 1.628 / sqrt(n).
  const int n = 10000;
  Rng rng = derive_stream(7, "kuma-ks");
  std::vector<double> sample(n);
  for (double& u : sample) u = kumaraswamy_noise(1.0, rng) + 0.5;
  std::sort(sample.begin(), sample.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    ks = std::max(ks, std::abs((i + 1.0) / n - sample[i]));
    ks = std::max(ks, std::abs(sample[i] - double(i) / n));
  }
  CHECK(ks <= 1.628 / std::sqrt(double(n)));
}

TEST_CASE("hard rounding and its surrogate derivative") {
  CHECK(hard_round(0.5) == 1.0);
  CHECK(hard_round(-0.5) == -1.0);
  CHECK(hard_round(2.4) == 2.0);
  CHECK(hard_round_surrogate_deriv(0.2) == soft_round(0.2, 1e-4).deriv);
}

TEST_CASE("Stage I schedule hits its endpoints exactly") {
  const StageSchedule s1 = StageSchedule::stage1(1000);
  const SchedulePoint first = schedule_at(s1, 0);
  CHECK(first.lr == 1e-2);
  CHECK(first.temperature == 0.3);
  CHECK(first.noise_a == 2.0);
  const SchedulePoint last = schedule_at(s1, 999);
  CHECK(last.lr == 0.0);
  CHECK(last.temperature == 0.1);
  CHECK(last.noise_a == 1.0);
  CHECK_THROWS_AS(schedule_at(s1, 1000), std::out_of_range);
}

TEST_CASE("Stage II plateau decay") {
  const StageSchedule s2 = StageSchedule::stage2(10000);
  CHECK(schedule_at(s2, 0).lr == 1e-4);
  CHECK(schedule_at(s2, 0).temperature == 1e-4);
  CHECK(schedule_at(s2, 0).noise_a == 0.0);

  PlateauDecay decay(s2);
  decay.observe(1.0);  // establishes the best loss
  for (int round = 0; round < 3; ++round)
    for (int i = 0; i < 40; ++i) decay.observe(1.0);
  CHECK(decay.current_lr() == doctest::Approx(1e-4 * 0.8 * 0.8 * 0.8).epsilon(1e-12));

  // An improvement resets the patience counter.
  PlateauDecay fresh(s2);
  fresh.observe(1.0);
  for (int i = 0; i < 39; ++i) fresh.observe(1.0);
  fresh.observe(0.5);
  for (int i = 0; i < 39; ++i) fresh.observe(0.6);
  CHECK(fresh.current_lr() == 1e-4);

  // The decay never goes below the floor.
  PlateauDecay floor_test(s2);
  floor_test.observe(1.0);
  for (int i = 0; i < 50 * 41; ++i) floor_test.observe(2.0);
  CHECK(floor_test.current_lr() >= 1e-8);
}
