#pragma once

#include "mummi/mssm/checkpoint.hpp"
#include "mummi/mssm/nn.hpp"

namespace mummi::agent {

using diff::Tensor;

double global_grad_norm(const std::vector<Tensor>& params);
/// Scales gradients so their global norm is at most max_norm; returns the
/// pre-clip norm.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

/// Adam with bias correction. Parameters whose grad is absent are skipped,
/// and a freshly-constructed optimizer leaves parameters unchanged under a
/// zero gradient.
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  Adam(const mssm::ParamRegistry& registry, Options opts);

  void step();
  void zero_grad();
  std::uint64_t step_count() const { return t_; }
  const Options& options() const { return opts_; }

  /// Moment vectors as checkpoint entries under `section`.
  void save_state(mssm::Checkpoint& ckpt, const std::string& section) const;
  void load_state(const mssm::Checkpoint& ckpt, const std::string& section);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  Options opts_;
  std::uint64_t t_ = 0;
};

}  // namespace mummi::agent
