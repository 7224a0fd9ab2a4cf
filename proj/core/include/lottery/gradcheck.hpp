#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace lottery {

// Central-difference gradient check.
//
// `loss` evaluates the objective at the current contents of `params` (the
// checker perturbs entries in place and restores them afterwards).
// `analytic` is the gradient under test, one entry per parameter. Returns
// the max over the probed coordinates of
//   |analytic - central_difference| / max(|analytic|, 1e-8).
// `coords` selects the probed coordinates; empty probes all of them.
// Throws std::domain_error if the loss evaluates to a non-finite value.
double finite_diff_check(std::span<double> params,
                         const std::function<double()>& loss,
                         std::span<const double> analytic, double epsilon,
                         std::span<const std::size_t> coords = {});

}  // namespace lottery
