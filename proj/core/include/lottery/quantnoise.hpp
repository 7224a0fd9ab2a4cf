#pragma once

#include "lottery/activation.hpp"
#include "lottery/rng.hpp"

namespace lottery {

// Soft rounding with temperature T:
//   s_T(z) = floor(z) + 0.5 + 0.5 * tanh(delta/T) / tanh(1/(2T)),
//   delta  = z - floor(z) - 0.5.
// Fixes integers exactly, is strictly increasing, and approaches hard
// rounding as T -> 0. Returns the value and its analytic derivative.
ValueGrad soft_round(double z, double temperature);

// Kumaraswamy noise in (-0.5, 0.5). Shape a >= 1 controls peakedness; the
// second shape is tied to a by the mode-at-0.5 constraint
//   b = ((a - 1) * 2^a + 1) / a,
// so a = 1 is exactly uniform noise and larger a concentrates around 0.
double kumaraswamy_noise(double a, Rng& rng);
double kumaraswamy_shape_b(double a);

// Round half away from zero.
double hard_round(double z);

// Derivative surrogate used when hard rounding sits in a gradient path:
// the soft_round derivative at the Stage II temperature.
double hard_round_surrogate_deriv(double z, double temperature = 1e-4);

struct SchedulePoint {
  double lr = 0.0;           // learning rate for z / ModNet / ARM
  double temperature = 0.0;  // soft-rounding T
  double noise_a = 0.0;      // Kumaraswamy strength (0 = no noise)
};

enum class Stage { kOne, kTwo };

// Per-stage hyperparameter schedule. Stage I runs a cosine learning rate
// with linear temperature/noise ramps; Stage II starts at `lr_start` and is
// driven by the plateau detector below (temperature pinned, no noise).
struct StageSchedule {
  Stage stage = Stage::kOne;
  long steps = 100000;
  double lr_start = 1e-2;
  double lr_end = 0.0;
  double t_start = 0.3;
  double t_end = 0.1;
  double noise_start = 2.0;
  double noise_end = 1.0;
  // Stage II plateau rule.
  double decay_factor = 0.8;
  long patience = 40;
  double lr_floor = 1e-8;

  static StageSchedule stage1(long steps = 100000);
  static StageSchedule stage2(long steps = 10000);
};

// Stage I: cosine lr, linear T and noise strength, exact at both endpoints.
// Stage II: returns (lr_start, 1e-4, 0); the caller applies the plateau
// multiplier from PlateauDecay.
SchedulePoint schedule_at(const StageSchedule& sched, long step);

// Multiplies the learning rate by decay_factor whenever the best loss seen
// has not improved for `patience` consecutive steps.
class PlateauDecay {
 public:
  explicit PlateauDecay(const StageSchedule& sched);

  // Feeds one step's loss; returns the lr to use for the next step.
  double observe(double loss);
  double current_lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  double floor_;
  long patience_;
  long stale_ = 0;
  double best_;
};

}  // namespace lottery
