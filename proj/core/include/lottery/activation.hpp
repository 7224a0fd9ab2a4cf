#pragma once

namespace lottery {

struct ValueGrad {
  double value = 0.0;
  double deriv = 0.0;
};

// Exact-erf GELU: x * Phi(x) with Phi the standard normal CDF.
// The derivative is Phi(x) + x * phi(x).
ValueGrad gelu(double x);
double gelu_value(double x);

// tanh with derivative expressed through the output value (1 - y^2).
ValueGrad tanh_act(double x);

}  // namespace lottery
