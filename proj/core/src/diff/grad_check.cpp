#include "mummi/diff/grad_check.hpp"

#include <cmath>

namespace mummi::diff {

GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                           double eps) {
  // Analytic pass.
  std::vector<std::vector<double>> analytic(params.size());
  {
    for (auto p : params) p.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto* g = params[i].grad();
      analytic[i] = g ? *g : std::vector<double>(static_cast<std::size_t>(params[i].numel()), 0.0);
    }
    for (auto p : params) p.zero_grad();
  }

  auto eval = [&f](std::size_t param_idx, Index elem) {
    NoGradScope no_grad;
    const double v = f().scalar_value();
    if (!std::isfinite(v)) {
      throw DomainError("grad_check", "non-finite objective when perturbing parameter " +
                                          std::to_string(param_idx) + " element " + std::to_string(elem));
    }
    return v;
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto vals = p.mutable_values();
    for (Index j = 0; j < p.numel(); ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const double saved = vals[jj];
      vals[jj] = saved + eps;
      const double fp = eval(i, j);
      vals[jj] = saved - eps;
      const double fm = eval(i, j);
      vals[jj] = saved;

      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][jj];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = i;
        result.worst_element = j;
      }
    }
  }
  return result;
}

}  // namespace mummi::diff
