#pragma once

#include "mummi/agent/actor_critic.hpp"
#include "mummi/agent/replay_buffer.hpp"
#include "mummi/envs/toy_world.hpp"
#include "mummi/losses/losses.hpp"

namespace mummi::agent {

struct TrainConfig {
  std::string variant = "mummi";  // mummi | mummi-b | elbo
  Index batch_size = 8;
  Index seq_len = 25;
  Index total_steps = 200;  // outer iterations; each collects one episode
  Index model_updates = 4;
  Index ac_updates = 2;
  Index imagination_horizon = 10;
  double discount = 0.99;
  double td_lambda = 0.95;
  double lr_model = 6e-4;
  double lr_actor = 8e-5;
  double lr_critic = 8e-5;
  std::map<std::string, double> modality_weights;  // default weight 1 per modality
  double missing_rate = 0.375;
  Index buffer_capacity = 500;
  Index prefill_episodes = 5;
  double explore_noise_std = 0.3;   // decays linearly to the final value
  double explore_noise_final = 0.05;
  double grad_clip = 100.0;
  double free_nats = 0.0;
  bool sequence_level_contrastive = false;
  Index eval_every = 50;
  Index eval_episodes = 5;
  Index checkpoint_every = 50;
  std::vector<Index> policy_hidden = {64, 64};
  std::string offline_dir;  // train from an episode archive instead of collecting
  std::uint64_t seed = 0;

  void validate() const;
};

/// Running latent posterior for acting in the environment: incorporates one
/// observation bundle per step, honoring per-modality presence flags, with
/// the same fusion and fallback semantics as offline filtering.
class OnlineFilter {
 public:
  OnlineFilter(const MssmModel& model, std::uint64_t noise_seed);
  void reset();
  void observe(const envs::ObsBundle& obs, const std::vector<bool>& present,
               const std::vector<double>& prev_action);
  const Tensor& h() const { return h_; }
  const Tensor& s_c() const { return s_c_; }

 private:
  const MssmModel* model_;
  diff::Rng noise_;
  Tensor h_, s_c_;
};

struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  double masked_fraction = 0.0;
  Index episodes = 0;
};

/// Evaluation protocol: no exploration noise, masks at `missing_rate` applied
/// to observations before filtering. Episodes may run in parallel (capped by
/// MUMMI_THREADS); seeds are pre-drawn so results do not depend on scheduling.
EvalResult evaluate_policy(const MssmModel& model, const Policy& policy,
                           const envs::ToyWorldConfig& env_cfg, Index episodes,
                           double missing_rate, std::uint64_t seed, bool use_cem = false,
                           const CemOptions* cem_opts = nullptr);

struct TrainResult {
  Index steps_completed = 0;
  bool diverged = false;
  std::string checkpoint_path;
  double final_eval_mean = 0.0;  // at missing rate 0
};

class TrainDivergence : public diff::DiffError {
 public:
  using DiffError::DiffError;
};

/// Outer loop: collect (with exploration noise) -> world-model updates on the
/// configured loss variant -> actor-critic updates on imagined rollouts from
/// posterior states; periodic evaluation at missing rates {0, 0.375, 0.75}
/// and checkpointing. A non-finite loss halts with the last checkpoint
/// preserved and `diverged` set. With `resume`, restores parameters,
/// optimizer moments, RNG streams, and the replay store from `run_dir`.
TrainResult train_loop(const TrainConfig& cfg, const envs::ToyWorldConfig& env_cfg,
                       const std::string& run_dir, const std::string& run_config_json,
                       bool resume = false);

/// Model, policy, and environment config rebuilt from a training checkpoint.
struct LoadedAgent {
  mssm::MssmConfig model_cfg;
  envs::ToyWorldConfig env_cfg;
  std::unique_ptr<MssmModel> model;
  std::unique_ptr<Policy> policy;
  std::unique_ptr<ValueNet> value;
  std::string run_config_json;
  std::map<std::string, std::string> meta;
};

LoadedAgent load_agent(const std::string& checkpoint_path);

}  // namespace mummi::agent
