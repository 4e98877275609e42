#pragma once

#include <functional>
#include <optional>

#include "mummi/envs/episode.hpp"
#include "mummi/mssm/config.hpp"
#include "mummi/mssm/nn.hpp"

namespace mummi::mssm {

/// z_t decomposed into the deterministic recurrent state and the two
/// stochastic states (combined / fused-observation).
struct LatentState {
  Tensor h;    // [B, H]
  Tensor s_c;  // [B, C]
  Tensor s_f;  // [B, F]
};

/// Model-ready view of a batch: tensors per timestep, modality order aligned
/// with the model config. A modality absent from the source episodes has no
/// observation tensors and an all-zero mask.
struct Batch {
  diff::Index batch_size = 0;
  diff::Index seq_len = 0;
  std::vector<std::optional<std::vector<Tensor>>> observations;  // [M] -> [T] of [B, D_m]
  std::vector<std::vector<Tensor>> masks;                        // [M][T] of [B, 1]
  std::vector<Tensor> actions;                                   // [T] of [B, A]
  std::vector<Tensor> rewards;                                   // [T] of [B, 1]
};

struct FilterStep {
  LatentState state;  // h_t, sampled s_c, sampled s_f
  DiagGaussian q_f;   // fused posterior over s_f (fallback rows: the prior)
  DiagGaussian q_c;   // posterior over s_c
  DiagGaussian p_c;   // prior over s_c given h_t
  DiagGaussian p_f;   // prior over s_f given the prior-path s_c sample
  Tensor prior_c_sample;
  std::vector<std::optional<DiagGaussian>> experts;  // per-modality, nullopt when absent
  std::vector<Tensor> masks;                         // [B, 1] per modality
  Tensor any_present;                                // [B, 1]
};

struct FilterResult {
  std::vector<FilterStep> steps;
  diff::Index batch_size = 0;
};

struct ImaginedRollout {
  std::vector<Tensor> h;            // horizon + 1
  std::vector<Tensor> s_c;          // horizon + 1
  std::vector<Tensor> actions;      // horizon
  std::vector<Tensor> reward_mean;  // horizon, predicted at states 1..horizon
};

/// Action source for imagination: returns [B, A] given the current latent.
using PolicyFn = std::function<Tensor(const Tensor& h, const Tensor& s_c)>;

class MssmModel {
 public:
  MssmModel(MssmConfig cfg, diff::Rng& init_rng);

  const MssmConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

  // One-step pieces.
  Tensor deterministic_step(const Tensor& h_prev, const Tensor& s_c_prev, const Tensor& a_prev) const;
  DiagGaussian prior_s_c(const Tensor& h) const;
  DiagGaussian prior_s_f(const Tensor& s_c) const;
  DiagGaussian encode_modality(std::size_t m, const Tensor& obs) const;
  DiagGaussian posterior_s_c(const Tensor& s_f, const Tensor& h) const;
  DiagGaussian decode_modality(std::size_t m, const Tensor& h, const Tensor& s_c) const;
  DiagGaussian predict_reward(const Tensor& h, const Tensor& s_c) const;
  Tensor project_latent(const Tensor& h, const Tensor& s_c) const;

  /// PoE over the present experts, honoring the configured prior-expert flag.
  DiagGaussian fuse_posterior(const std::vector<DiagGaussian>& experts) const;

  /// One filtering step. Missing modalities are dropped from the fusion; rows
  /// where every modality is missing fall back to the prior over s_f along the
  /// current prior path. Noise is drawn in a fixed order (prior s_c, s_f, s_c)
  /// so a seed pins the whole pass.
  FilterStep filter_step(const Tensor& h_prev, const Tensor& s_c_prev, const Tensor& a_prev,
                         const std::vector<std::optional<Tensor>>& obs,
                         const std::vector<Tensor>& masks, diff::Rng& noise) const;

  FilterResult filter_sequence(const Batch& batch, diff::Rng& noise) const;
  FilterResult filter_sequence(const envs::Episode& episode, std::uint64_t noise_seed) const;

  /// Rolls the prior path only; never reads observations and never samples
  /// s_f. Horizon 0 returns just the start state.
  ImaginedRollout imagine_rollout(const Tensor& h0, const Tensor& s_c0, const PolicyFn& policy,
                                  diff::Index horizon, diff::Rng& noise) const;
  ImaginedRollout imagine_rollout(const Tensor& h0, const Tensor& s_c0,
                                  const std::vector<Tensor>& actions, diff::Rng& noise) const;

  LatentState initial_state(diff::Index batch) const;

 private:
  ImaginedRollout imagine_impl(const Tensor& h0, const Tensor& s_c0, const PolicyFn* policy,
                               const std::vector<Tensor>* actions, diff::Index horizon,
                               diff::Rng& noise) const;

  MssmConfig cfg_;
  ParamRegistry params_;
  std::vector<GaussianHead> encoders_;
  GruCell gru_;
  GaussianHead prior_c_head_;
  GaussianHead prior_f_head_;
  GaussianHead posterior_c_head_;
  std::vector<Mlp> decoders_;
  Mlp reward_head_;
  Mlp projector_;
};

/// Whole-episode batch (B = 1) in config modality order; modalities the
/// episode lacks get empty observations and all-zero masks.
Batch batch_from_episode(const MssmConfig& cfg, const envs::Episode& episode);

}  // namespace mummi::mssm
