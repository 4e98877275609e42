#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mummi/diff/tensor.hpp"

namespace mummi::diff {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;  // index into the params list
  Index worst_element = 0;      // flat element index within that param
  std::size_t checked = 0;      // number of scalar entries compared
};

/// Compares reverse-mode gradients of `f` against central finite differences
/// over every element of every parameter.
///
/// `f` must be deterministic given the parameter values (callers freeze any
/// sampling noise, e.g. by seeding). Relative error is
/// |analytic - numeric| / max(1, |analytic|, |numeric|); an absent analytic
/// gradient counts as zero. A non-finite evaluation at a perturbed point
/// raises DomainError identifying the parameter.
GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                           double eps = 1e-5);

}  // namespace mummi::diff
