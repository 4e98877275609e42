#pragma once

#include "mummi/diff/ops.hpp"

namespace mummi::agent {

using diff::Tensor;

/// TD(lambda) targets over an imagined horizon H:
///   G_t = r_t + gamma * ((1 - lambda) * v_{t+1} + lambda * G_{t+1}),
/// bootstrapped with G_{H-1} = r_{H-1} + gamma * v_H.
/// rewards has H entries, values H + 1; the result has H entries and stays on
/// the tape so actor gradients flow through rewards and values.
std::vector<Tensor> lambda_returns(const std::vector<Tensor>& rewards,
                                   const std::vector<Tensor>& values, double gamma, double lambda);

/// Scalar version for plain arrays.
std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma, double lambda);

}  // namespace mummi::agent
