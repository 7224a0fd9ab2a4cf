#include "lottery/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lottery {

double finite_diff_check(std::span<double> params,
                         const std::function<double()>& loss,
                         std::span<const double> analytic, double epsilon,
                         std::span<const std::size_t> coords) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("finite_diff_check: gradient size mismatch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");

  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(params.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coords = all;
  }

  double max_rel = 0.0;
  for (std::size_t i : coords) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss();
    params[i] = saved - epsilon;
    const double down = loss();
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::domain_error("finite_diff_check: loss is non-finite near the probe point");
    const double numeric = (up - down) / (2.0 * epsilon);
    const double rel = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace lottery
