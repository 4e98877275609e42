#include "mummi/agent/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mummi::agent {

namespace {
std::vector<Index> to_widths(Index in, const std::vector<Index>& hidden, Index out) {
  std::vector<Index> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}
}  // namespace

Policy::Policy(Index h_dim, Index c_dim, Index action_dim, const std::vector<Index>& hidden,
               mssm::Activation act, diff::Rng& rng)
    : action_dim_(action_dim) {
  trunk_ = mssm::Mlp(params_, "actor", to_widths(h_dim + c_dim, hidden, action_dim), act, rng);
  // softplus(-1) + floor ~= 0.31 initial exploration spread
  raw_std_ = params_.add("actor.raw_std", Tensor::full({action_dim}, -1.0));
}

Tensor Policy::mean(const Tensor& h, const Tensor& s_c) const {
  return diff::tanh(trunk_(diff::concat({h, s_c}, 1)));
}

Tensor Policy::action_std() const { return diff::softplus(raw_std_) + 1e-3; }

Tensor Policy::sample(const Tensor& h, const Tensor& s_c, diff::Rng& noise) const {
  const Tensor mu = mean(h, s_c);
  return mu + action_std() * noise.normal_tensor(mu.shape());
}

ValueNet::ValueNet(Index h_dim, Index c_dim, const std::vector<Index>& hidden, mssm::Activation act,
                   diff::Rng& rng) {
  net_ = mssm::Mlp(params_, "value", to_widths(h_dim + c_dim, hidden, 1), act, rng);
}

Tensor ValueNet::operator()(const Tensor& h, const Tensor& s_c) const {
  return net_(diff::concat({h, s_c}, 1));
}

AcMetrics actor_critic_update(const MssmModel& model, Policy& policy, ValueNet& value,
                              const Tensor& start_h, const Tensor& start_s_c,
                              const AcUpdateConfig& cfg, Adam& actor_opt, Adam& critic_opt,
                              diff::Rng& rng) {
  if (cfg.horizon < 1) throw diff::DiffError("actor_critic_update: horizon must be >= 1");
  AcMetrics metrics;
  auto model_params = const_cast<MssmModel&>(model).params().tensors();
  auto actor_params = policy.params().tensors();
  auto critic_params = value.params().tensors();

  std::vector<Tensor> target_values;  // detached lambda-return targets, per step
  std::vector<Tensor> states_h, states_c;

  {
    diff::Tape tape;
    diff::TapeScope scope(tape);
    const mssm::PolicyFn act = [&](const Tensor& h, const Tensor& s_c) {
      return policy.sample(h, s_c, rng);
    };
    const auto roll =
        model.imagine_rollout(start_h.detached(), start_s_c.detached(), act, cfg.horizon, rng);

    std::vector<Tensor> values;
    values.reserve(roll.h.size());
    for (std::size_t k = 0; k < roll.h.size(); ++k) values.push_back(value(roll.h[k], roll.s_c[k]));
    const auto targets = lambda_returns(roll.reward_mean, values, cfg.gamma, cfg.td_lambda);

    Tensor target_sum;
    for (const auto& g : targets) {
      target_sum = target_sum.defined() ? target_sum + diff::sum(g) : diff::sum(g);
      target_values.push_back(diff::stop_gradient(g));
    }
    const auto n = static_cast<double>(targets.size()) * static_cast<double>(start_h.dim(0));
    const Tensor actor_loss = -(target_sum / n);
    metrics.actor_loss = actor_loss.scalar_value();
    metrics.mean_target = -metrics.actor_loss;
    if (!std::isfinite(metrics.actor_loss))
      throw diff::DomainError("actor_critic_update", "non-finite actor loss");

    tape.backward(actor_loss);
    metrics.actor_grad_norm = clip_grad_norm(actor_params, cfg.grad_clip);
    actor_opt.step();

    for (std::size_t k = 0; k + 1 < roll.h.size(); ++k) {
      states_h.push_back(roll.h[k].detached());
      states_c.push_back(roll.s_c[k].detached());
    }
  }
  // Actor backward also deposited grads on model and value leaves; drop them
  // so the next update starts clean.
  for (auto& p : model_params) p.zero_grad();
  for (auto& p : critic_params) p.zero_grad();
  for (auto& p : actor_params) p.zero_grad();

  {
    diff::Tape tape;
    diff::TapeScope scope(tape);
    Tensor loss_sum;
    for (std::size_t k = 0; k < states_h.size(); ++k) {
      const Tensor pred = value(states_h[k], states_c[k]);
      const Tensor sq = diff::square(pred - target_values[k]) * 0.5;
      loss_sum = loss_sum.defined() ? loss_sum + diff::sum(sq) : diff::sum(sq);
    }
    const auto n = static_cast<double>(states_h.size()) * static_cast<double>(start_h.dim(0));
    const Tensor critic_loss = loss_sum / n;
    metrics.critic_loss = critic_loss.scalar_value();
    if (!std::isfinite(metrics.critic_loss))
      throw diff::DomainError("actor_critic_update", "non-finite critic loss");
    tape.backward(critic_loss);
    metrics.critic_grad_norm = clip_grad_norm(critic_params, cfg.grad_clip);
    critic_opt.step();
  }
  for (auto& p : critic_params) p.zero_grad();
  return metrics;
}

std::vector<double> cem_plan(const MssmModel& model, const Tensor& h0, const Tensor& s_c0,
                             const CemOptions& opts, diff::Rng& rng, CemDiagnostics* diag) {
  if (opts.candidates <= opts.elites || opts.elites < 2)
    throw diff::DiffError("cem_plan: need candidates > elites >= 2");
  diff::NoGradScope no_grad;
  const Index a_dim = model.config().action_dim;
  const Index plan_len = opts.horizon * a_dim;
  std::vector<double> mean(static_cast<std::size_t>(plan_len), 0.0);
  std::vector<double> std(static_cast<std::size_t>(plan_len), opts.init_std);

  // Candidate rollouts run batched: row k of every step tensor is candidate k.
  std::vector<double> h_rep(static_cast<std::size_t>(opts.candidates * h0.dim(1)));
  std::vector<double> c_rep(static_cast<std::size_t>(opts.candidates * s_c0.dim(1)));
  for (Index k = 0; k < opts.candidates; ++k) {
    std::copy_n(h0.values().begin(), h0.dim(1), h_rep.begin() + k * h0.dim(1));
    std::copy_n(s_c0.values().begin(), s_c0.dim(1), c_rep.begin() + k * s_c0.dim(1));
  }
  const Tensor h_start = Tensor::from_values({opts.candidates, h0.dim(1)}, h_rep);
  const Tensor c_start = Tensor::from_values({opts.candidates, s_c0.dim(1)}, c_rep);

  for (Index iter = 0; iter < opts.iterations; ++iter) {
    std::vector<std::vector<double>> plans(static_cast<std::size_t>(opts.candidates));
    for (auto& p : plans) {
      p.resize(static_cast<std::size_t>(plan_len));
      for (Index j = 0; j < plan_len; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        p[jj] = std::clamp(mean[jj] + std[jj] * rng.normal(), -1.0, 1.0);
      }
    }
    std::vector<Tensor> actions;
    for (Index t = 0; t < opts.horizon; ++t) {
      std::vector<double> step(static_cast<std::size_t>(opts.candidates * a_dim));
      for (Index k = 0; k < opts.candidates; ++k)
        std::copy_n(plans[static_cast<std::size_t>(k)].begin() + t * a_dim, a_dim,
                    step.begin() + k * a_dim);
      actions.push_back(Tensor::from_values({opts.candidates, a_dim}, std::move(step)));
    }
    const auto roll = model.imagine_rollout(h_start, c_start, actions, rng);
    std::vector<double> returns(static_cast<std::size_t>(opts.candidates), 0.0);
    for (const auto& r : roll.reward_mean) {
      const auto rv = r.values();
      for (Index k = 0; k < opts.candidates; ++k) returns[static_cast<std::size_t>(k)] += rv[static_cast<std::size_t>(k)];
    }

    std::vector<Index> order(static_cast<std::size_t>(opts.candidates));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + opts.elites, order.end(),
                      [&](Index a, Index b) { return returns[static_cast<std::size_t>(a)] > returns[static_cast<std::size_t>(b)]; });

    if (diag) {
      double s = 0.0;
      for (Index e = 0; e < opts.elites; ++e) s += returns[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])];
      diag->mean_elite_return.push_back(s / static_cast<double>(opts.elites));
    }

    for (Index j = 0; j < plan_len; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      double mu = 0.0;
      for (Index e = 0; e < opts.elites; ++e) mu += plans[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])][jj];
      mu /= static_cast<double>(opts.elites);
      double var = 0.0;
      for (Index e = 0; e < opts.elites; ++e) {
        const double d = plans[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])][jj] - mu;
        var += d * d;
      }
      var /= static_cast<double>(opts.elites);
      mean[jj] = mu;
      std[jj] = std::max(opts.std_floor, std::sqrt(var));
    }
  }

  std::vector<double> first(static_cast<std::size_t>(a_dim));
  for (Index j = 0; j < a_dim; ++j) first[static_cast<std::size_t>(j)] = std::clamp(mean[static_cast<std::size_t>(j)], -1.0, 1.0);
  return first;
}

}  // namespace mummi::agent
