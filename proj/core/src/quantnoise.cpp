#include "lottery/quantnoise.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lottery {

ValueGrad soft_round(double z, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("soft_round: temperature must be > 0");
  const double fl = std::floor(z);
  const double delta = z - fl - 0.5;
  const double denom = std::tanh(0.5 / temperature);
  const double t = std::tanh(delta / temperature);
  const double value = fl + 0.5 + 0.5 * t / denom;
  // d/dz [0.5 * tanh(delta/T)] = (0.5/T) * (1 - tanh^2)
  const double deriv = 0.5 / temperature * (1.0 - t * t) / denom;
  return {value, deriv};
}

double kumaraswamy_shape_b(double a) {
  if (a < 1.0) throw std::invalid_argument("kumaraswamy_noise: shape a must be >= 1");
  return ((a - 1.0) * std::exp2(a) + 1.0) / a;
}

double kumaraswamy_noise(double a, Rng& rng) {
  const double b = kumaraswamy_shape_b(a);
  const double v = rng.uniform_open01();
  const double t = std::pow(1.0 - std::pow(1.0 - v, 1.0 / b), 1.0 / a);
  return t - 0.5;
}

double hard_round(double z) {
  return std::round(z);  // rounds half away from zero
}

double hard_round_surrogate_deriv(double z, double temperature) {
  return soft_round(z, temperature).deriv;
}

StageSchedule StageSchedule::stage1(long steps) {
  StageSchedule s;
  s.stage = Stage::kOne;
  s.steps = steps;
  return s;
}

StageSchedule StageSchedule::stage2(long steps) {
  StageSchedule s;
  s.stage = Stage::kTwo;
  s.steps = steps;
  s.lr_start = 1e-4;
  s.lr_end = 1e-8;
  s.t_start = 1e-4;
  s.t_end = 1e-4;
  s.noise_start = 0.0;
  s.noise_end = 0.0;
  return s;
}

SchedulePoint schedule_at(const StageSchedule& sched, long step) {
  if (step < 0 || step >= sched.steps) throw std::out_of_range("schedule_at: step outside stage");
  if (sched.stage == Stage::kTwo) return {sched.lr_start, sched.t_start, 0.0};

  const double u = sched.steps > 1 ? static_cast<double>(step) / (sched.steps - 1) : 0.0;
  SchedulePoint p;
  // Cosine from lr_start to lr_end; std::lerp keeps the endpoints exact.
  const double cosine = 0.5 * (1.0 + std::cos(u * 3.14159265358979323846));
  p.lr = std::lerp(sched.lr_end, sched.lr_start, cosine);
  p.temperature = std::lerp(sched.t_start, sched.t_end, u);
  p.noise_a = std::lerp(sched.noise_start, sched.noise_end, u);
  return p;
}

PlateauDecay::PlateauDecay(const StageSchedule& sched)
    : lr_(sched.lr_start),
      factor_(sched.decay_factor),
      floor_(sched.lr_floor),
      patience_(sched.patience),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauDecay::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    stale_ = 0;
  } else if (++stale_ >= patience_) {
    lr_ = std::max(lr_ * factor_, floor_);
    stale_ = 0;
  }
  return lr_;
}

}  // namespace lottery
