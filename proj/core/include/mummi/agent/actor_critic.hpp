#pragma once

#include "mummi/agent/adam.hpp"
#include "mummi/agent/returns.hpp"
#include "mummi/mssm/model.hpp"

namespace mummi::agent {

using diff::Index;
using mssm::MssmModel;

/// Gaussian policy with a tanh-squashed mean head and a state-independent
/// learned std. Samples are reparameterized; the environment clips actions.
class Policy {
 public:
  Policy() = default;
  Policy(Index h_dim, Index c_dim, Index action_dim, const std::vector<Index>& hidden,
         mssm::Activation act, diff::Rng& rng);

  Tensor mean(const Tensor& h, const Tensor& s_c) const;
  Tensor sample(const Tensor& h, const Tensor& s_c, diff::Rng& noise) const;
  Tensor action_std() const;  // [A]

  mssm::ParamRegistry& params() { return params_; }
  const mssm::ParamRegistry& params() const { return params_; }

 private:
  mssm::ParamRegistry params_;
  mssm::Mlp trunk_;
  Tensor raw_std_;
  Index action_dim_ = 0;
};

class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(Index h_dim, Index c_dim, const std::vector<Index>& hidden, mssm::Activation act,
           diff::Rng& rng);
  Tensor operator()(const Tensor& h, const Tensor& s_c) const;

  mssm::ParamRegistry& params() { return params_; }
  const mssm::ParamRegistry& params() const { return params_; }

 private:
  mssm::ParamRegistry params_;
  mssm::Mlp net_;
};

struct AcUpdateConfig {
  Index horizon = 10;
  double gamma = 0.99;
  double td_lambda = 0.95;
  double grad_clip = 100.0;
};

struct AcMetrics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_target = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
};

/// One actor and one critic step on rollouts imagined from the given start
/// states (detached internally). The actor ascends the mean lambda-return
/// through the reparameterized dynamics; the critic regresses to
/// gradient-stopped targets. World-model parameters are never stepped, and
/// their grads are cleared before returning. Throws on a non-finite loss.
AcMetrics actor_critic_update(const MssmModel& model, Policy& policy, ValueNet& value,
                              const Tensor& start_h, const Tensor& start_s_c,
                              const AcUpdateConfig& cfg, Adam& actor_opt, Adam& critic_opt,
                              diff::Rng& rng);

struct CemOptions {
  Index horizon = 12;
  Index candidates = 64;
  Index iterations = 5;
  Index elites = 8;
  double init_std = 1.0;
  double std_floor = 0.05;
};

struct CemDiagnostics {
  std::vector<double> mean_elite_return;  // per iteration
};

/// Cross-entropy-method planner over action sequences, scored by the model's
/// predicted reward sums under imagined rollouts. Returns the first action of
/// the final mean, clipped to [-1, 1]. Zero iterations return the zero action.
std::vector<double> cem_plan(const MssmModel& model, const Tensor& h0, const Tensor& s_c0,
                             const CemOptions& opts, diff::Rng& rng,
                             CemDiagnostics* diag = nullptr);

}  // namespace mummi::agent
