#include "mummi/agent/returns.hpp"

namespace mummi::agent {

std::vector<Tensor> lambda_returns(const std::vector<Tensor>& rewards,
                                   const std::vector<Tensor>& values, double gamma, double lambda) {
  const std::size_t h = rewards.size();
  if (h == 0) throw diff::DiffError("lambda_returns: horizon must be >= 1");
  if (values.size() != h + 1)
    throw diff::DiffError("lambda_returns: need H+1 values for H rewards, got " +
                          std::to_string(values.size()));
  std::vector<Tensor> targets(h);
  targets[h - 1] = rewards[h - 1] + values[h] * gamma;
  for (std::size_t t = h - 1; t-- > 0;) {
    targets[t] = rewards[t] + (values[t + 1] * (1.0 - lambda) + targets[t + 1] * lambda) * gamma;
  }
  return targets;
}

std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma, double lambda) {
  const std::size_t h = rewards.size();
  if (h == 0) throw diff::DiffError("lambda_returns: horizon must be >= 1");
  if (values.size() != h + 1)
    throw diff::DiffError("lambda_returns: need H+1 values for H rewards");
  std::vector<double> targets(h);
  targets[h - 1] = rewards[h - 1] + gamma * values[h];
  for (std::size_t t = h - 1; t-- > 0;)
    targets[t] = rewards[t] + gamma * ((1.0 - lambda) * values[t + 1] + lambda * targets[t + 1]);
  return targets;
}

}  // namespace mummi::agent
