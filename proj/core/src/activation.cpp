#include "lottery/activation.hpp"

#include <cmath>

namespace lottery {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

ValueGrad gelu(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return {x * cdf, cdf + x * pdf};
}

double gelu_value(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  return x * cdf;
}

ValueGrad tanh_act(double x) {
  const double y = std::tanh(x);
  return {y, 1.0 - y * y};
}

}  // namespace lottery
