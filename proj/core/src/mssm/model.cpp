#include "mummi/mssm/model.hpp"

namespace mummi::mssm {

namespace {
std::vector<Index> to_widths(Index in, const std::vector<Index>& hidden, Index out) {
  std::vector<Index> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}
}  // namespace

MssmModel::MssmModel(MssmConfig cfg, diff::Rng& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const Activation act = activation_from_string(cfg_.activation);
  const Index z_dim = cfg_.h_dim + cfg_.c_dim;

  for (const auto& m : cfg_.modalities) {
    encoders_.emplace_back(params_, "encoder." + m.name, m.flat_dim(), m.encoder_hidden, cfg_.f_dim,
                           act, cfg_.std_min, rng);
  }
  gru_ = GruCell(params_, "gru", cfg_.c_dim + cfg_.action_dim, cfg_.h_dim, rng);
  prior_c_head_ = GaussianHead(params_, "prior_c", cfg_.h_dim, cfg_.hidden, cfg_.c_dim, act,
                               cfg_.std_min, rng);
  prior_f_head_ = GaussianHead(params_, "prior_f", cfg_.c_dim, cfg_.hidden, cfg_.f_dim, act,
                               cfg_.std_min, rng);
  posterior_c_head_ = GaussianHead(params_, "posterior_c", cfg_.f_dim + cfg_.h_dim, cfg_.hidden,
                                   cfg_.c_dim, act, cfg_.std_min, rng);
  for (const auto& m : cfg_.modalities) {
    decoders_.emplace_back(params_, "decoder." + m.name, to_widths(z_dim, cfg_.hidden, m.flat_dim()),
                           act, rng);
  }
  reward_head_ = Mlp(params_, "reward", to_widths(z_dim, cfg_.hidden, 1), act, rng);
  projector_ = Mlp(params_, "projector", to_widths(z_dim, cfg_.hidden, cfg_.embed_dim()), act, rng);
}

Tensor MssmModel::deterministic_step(const Tensor& h_prev, const Tensor& s_c_prev,
                                     const Tensor& a_prev) const {
  if (s_c_prev.dim(1) != cfg_.c_dim || a_prev.dim(1) != cfg_.action_dim || h_prev.dim(1) != cfg_.h_dim)
    throw diff::ShapeError("deterministic_step",
                           "expected dims (" + std::to_string(cfg_.h_dim) + ", " +
                               std::to_string(cfg_.c_dim) + ", " + std::to_string(cfg_.action_dim) +
                               "), got " + diff::shape_to_string(h_prev.shape()) + ", " +
                               diff::shape_to_string(s_c_prev.shape()) + ", " +
                               diff::shape_to_string(a_prev.shape()));
  return gru_(diff::concat({s_c_prev, a_prev}, 1), h_prev);
}

DiagGaussian MssmModel::prior_s_c(const Tensor& h) const { return prior_c_head_(h); }

DiagGaussian MssmModel::prior_s_f(const Tensor& s_c) const { return prior_f_head_(s_c); }

DiagGaussian MssmModel::encode_modality(std::size_t m, const Tensor& obs) const {
  const auto& spec = cfg_.modalities.at(m);
  if (obs.shape().back() != spec.flat_dim())
    throw diff::ShapeError("encode_modality[" + spec.name + "]",
                           "expected flattened dim " + std::to_string(spec.flat_dim()) + ", got " +
                               diff::shape_to_string(obs.shape()));
  return encoders_[m](obs);
}

DiagGaussian MssmModel::posterior_s_c(const Tensor& s_f, const Tensor& h) const {
  return posterior_c_head_(diff::concat({s_f, h}, 1));
}

DiagGaussian MssmModel::decode_modality(std::size_t m, const Tensor& h, const Tensor& s_c) const {
  const Tensor mean = decoders_.at(m)(diff::concat({h, s_c}, 1));
  return DiagGaussian(mean, Tensor::full(mean.shape(), 1.0));  // fixed unit observation variance
}

DiagGaussian MssmModel::predict_reward(const Tensor& h, const Tensor& s_c) const {
  const Tensor mean = reward_head_(diff::concat({h, s_c}, 1));
  return DiagGaussian(mean, Tensor::full(mean.shape(), 1.0));
}

Tensor MssmModel::project_latent(const Tensor& h, const Tensor& s_c) const {
  return projector_(diff::concat({h, s_c}, 1));
}

DiagGaussian MssmModel::fuse_posterior(const std::vector<DiagGaussian>& experts) const {
  std::optional<DiagGaussian> prior;
  if (cfg_.use_prior_expert && !experts.empty()) {
    prior = DiagGaussian(Tensor::zeros(experts.front().mean.shape()),
                         Tensor::ones(experts.front().std.shape()));
  }
  return dist::poe_fuse(experts, prior);
}

LatentState MssmModel::initial_state(Index batch) const {
  return {Tensor::zeros({batch, cfg_.h_dim}), Tensor::zeros({batch, cfg_.c_dim}),
          Tensor::zeros({batch, cfg_.f_dim})};
}

FilterStep MssmModel::filter_step(const Tensor& h_prev, const Tensor& s_c_prev, const Tensor& a_prev,
                                  const std::vector<std::optional<Tensor>>& obs,
                                  const std::vector<Tensor>& masks, diff::Rng& noise) const {
  const std::size_t m_count = cfg_.modalities.size();
  if (obs.size() != m_count || masks.size() != m_count)
    throw diff::ShapeError("filter_step", "modality count mismatch: expected " +
                                              std::to_string(m_count));
  const Index batch = h_prev.dim(0);

  FilterStep out;
  out.state.h = deterministic_step(h_prev, s_c_prev, a_prev);
  out.p_c = prior_s_c(out.state.h);
  out.prior_c_sample = dist::sample_reparam(out.p_c, noise.normal_tensor({batch, cfg_.c_dim}));
  out.p_f = prior_s_f(out.prior_c_sample);

  std::vector<DiagGaussian> present_experts;
  std::vector<Tensor> present_masks;
  out.experts.resize(m_count);
  out.masks = masks;
  for (std::size_t m = 0; m < m_count; ++m) {
    if (!obs[m].has_value()) continue;  // absent modality: identical to an all-zero mask
    DiagGaussian expert = encode_modality(m, *obs[m]);
    out.experts[m] = expert;
    present_experts.push_back(std::move(expert));
    present_masks.push_back(masks[m]);
  }

  std::optional<DiagGaussian> prior_expert;
  if (cfg_.use_prior_expert) {
    prior_expert = DiagGaussian(Tensor::zeros({batch, cfg_.f_dim}), Tensor::ones({batch, cfg_.f_dim}));
  }
  out.q_f = dist::poe_fuse_masked(present_experts, present_masks, out.p_f, prior_expert,
                                  &out.any_present);

  out.state.s_f = dist::sample_reparam(out.q_f, noise.normal_tensor({batch, cfg_.f_dim}));
  out.q_c = posterior_s_c(out.state.s_f, out.state.h);
  out.state.s_c = dist::sample_reparam(out.q_c, noise.normal_tensor({batch, cfg_.c_dim}));
  return out;
}

FilterResult MssmModel::filter_sequence(const Batch& batch, diff::Rng& noise) const {
  if (batch.seq_len < 1) throw diff::DiffError("filter_sequence: empty sequence");
  const std::size_t m_count = cfg_.modalities.size();
  if (batch.observations.size() != m_count || batch.masks.size() != m_count)
    throw diff::ShapeError("filter_sequence", "batch modality count mismatch");
  for (std::size_t m = 0; m < m_count; ++m) {
    if (static_cast<Index>(batch.masks[m].size()) != batch.seq_len)
      throw diff::ShapeError("filter_sequence", "mask sequence length mismatch for modality " +
                                                    cfg_.modalities[m].name);
  }

  FilterResult result;
  result.batch_size = batch.batch_size;
  LatentState prev = initial_state(batch.batch_size);
  for (Index t = 0; t < batch.seq_len; ++t) {
    const Tensor a_prev = t == 0 ? Tensor::zeros({batch.batch_size, cfg_.action_dim})
                                 : batch.actions[static_cast<std::size_t>(t - 1)];
    std::vector<std::optional<Tensor>> obs_t(m_count);
    std::vector<Tensor> masks_t(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      if (batch.observations[m].has_value()) obs_t[m] = (*batch.observations[m])[static_cast<std::size_t>(t)];
      masks_t[m] = batch.masks[m][static_cast<std::size_t>(t)];
    }
    FilterStep step = filter_step(prev.h, prev.s_c, a_prev, obs_t, masks_t, noise);
    prev = step.state;
    result.steps.push_back(std::move(step));
  }
  return result;
}

FilterResult MssmModel::filter_sequence(const envs::Episode& episode, std::uint64_t noise_seed) const {
  diff::Rng noise(noise_seed);
  return filter_sequence(batch_from_episode(cfg_, episode), noise);
}

ImaginedRollout MssmModel::imagine_impl(const Tensor& h0, const Tensor& s_c0, const PolicyFn* policy,
                                        const std::vector<Tensor>* actions, Index horizon,
                                        diff::Rng& noise) const {
  if (horizon < 0) throw diff::DiffError("imagine_rollout: negative horizon");
  ImaginedRollout out;
  out.h.push_back(h0);
  out.s_c.push_back(s_c0);
  for (Index k = 0; k < horizon; ++k) {
    const Tensor a = policy ? (*policy)(out.h.back(), out.s_c.back())
                            : actions->at(static_cast<std::size_t>(k));
    out.actions.push_back(a);
    const Tensor h = deterministic_step(out.h.back(), out.s_c.back(), a);
    const DiagGaussian p_c = prior_s_c(h);
    const Tensor s_c = dist::sample_reparam(p_c, noise.normal_tensor({h.dim(0), cfg_.c_dim}));
    out.reward_mean.push_back(predict_reward(h, s_c).mean);
    out.h.push_back(h);
    out.s_c.push_back(s_c);
  }
  return out;
}

ImaginedRollout MssmModel::imagine_rollout(const Tensor& h0, const Tensor& s_c0,
                                           const PolicyFn& policy, Index horizon,
                                           diff::Rng& noise) const {
  return imagine_impl(h0, s_c0, &policy, nullptr, horizon, noise);
}

ImaginedRollout MssmModel::imagine_rollout(const Tensor& h0, const Tensor& s_c0,
                                           const std::vector<Tensor>& actions, diff::Rng& noise) const {
  return imagine_impl(h0, s_c0, nullptr, &actions, static_cast<Index>(actions.size()), noise);
}

Batch batch_from_episode(const MssmConfig& cfg, const envs::Episode& episode) {
  episode.validate();
  Batch b;
  b.batch_size = 1;
  b.seq_len = episode.length;
  const Index T = episode.length;
  const Index A = episode.action_dim;
  if (A != cfg.action_dim) throw diff::DiffError("batch_from_episode: action dim mismatch");

  for (const auto& spec : cfg.modalities) {
    const bool have = episode.observations.count(spec.name) > 0;
    std::optional<std::vector<Tensor>> obs;
    std::vector<Tensor> masks;
    if (have) {
      const auto& data = episode.observations.at(spec.name);
      const auto& mask = episode.masks.at(spec.name);
      const Index d = spec.flat_dim();
      obs.emplace();
      for (Index t = 0; t < T; ++t) {
        std::vector<double> row(data.begin() + t * d, data.begin() + (t + 1) * d);
        obs->push_back(Tensor::from_values({1, d}, std::move(row)));
        masks.push_back(Tensor::from_values({1, 1}, {mask[static_cast<std::size_t>(t)] ? 1.0 : 0.0}));
      }
    } else {
      for (Index t = 0; t < T; ++t) masks.push_back(Tensor::zeros({1, 1}));
    }
    b.observations.push_back(std::move(obs));
    b.masks.push_back(std::move(masks));
  }
  for (Index t = 0; t < T; ++t) {
    std::vector<double> a(episode.actions.begin() + t * A, episode.actions.begin() + (t + 1) * A);
    b.actions.push_back(Tensor::from_values({1, A}, std::move(a)));
    b.rewards.push_back(Tensor::from_values({1, 1}, {episode.rewards[static_cast<std::size_t>(t)]}));
  }
  return b;
}

}  // namespace mummi::mssm
