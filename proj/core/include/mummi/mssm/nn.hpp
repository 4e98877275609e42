#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mummi/diff/ops.hpp"
#include "mummi/diff/random.hpp"
#include "mummi/dist/diag_gaussian.hpp"

namespace mummi::mssm {

using diff::Index;
using diff::Tensor;
using dist::DiagGaussian;

/// Ordered, uniquely-named collection of learned tensors. Registration order
/// is the checkpoint order, so construction must be deterministic.
class ParamRegistry {
 public:
  Tensor add(const std::string& name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& named() const { return entries_; }
  std::vector<Tensor> tensors() const;
  Index total_size() const;
  void zero_grad_all();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

enum class Activation { kElu, kRelu, kTanh };
Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);
Tensor apply_activation(Activation a, const Tensor& x);

/// y = x W + b with Xavier-uniform init.
class Linear {
 public:
  Linear() = default;
  Linear(ParamRegistry& reg, const std::string& prefix, Index in, Index out, diff::Rng& rng);
  Tensor operator()(const Tensor& x) const;
  Index in_dim() const { return w_.dim(0); }
  Index out_dim() const { return w_.dim(1); }

 private:
  Tensor w_, b_;
};

class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; activation between layers, linear output.
  Mlp(ParamRegistry& reg, const std::string& prefix, const std::vector<Index>& widths,
      Activation act, diff::Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::kElu;
};

/// MLP trunk with mean and std heads; std = softplus(raw) + std_min.
class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(ParamRegistry& reg, const std::string& prefix, Index in,
               const std::vector<Index>& hidden, Index out, Activation act, double std_min,
               diff::Rng& rng);
  DiagGaussian operator()(const Tensor& x) const;

 private:
  std::vector<Linear> trunk_;
  Linear mean_head_, std_head_;
  Activation act_ = Activation::kElu;
  double std_min_ = 1e-3;
};

/// Gated recurrent cell. With all-zero weights both gates sit at 1/2 and the
/// candidate at 0, so h' = h / 2.
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamRegistry& reg, const std::string& prefix, Index input, Index hidden, diff::Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& h) const;
  Index hidden_dim() const { return hidden_; }

 private:
  Tensor w_x_;   // [in, 3H]  (reset | update | candidate)
  Tensor w_h_;   // [H, 2H]   (reset | update)
  Tensor w_hc_;  // [H, H]
  Tensor b_;     // [3H]
  Index hidden_ = 0;
};

}  // namespace mummi::mssm
