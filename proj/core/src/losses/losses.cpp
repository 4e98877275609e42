#include "mummi/losses/losses.hpp"

#include <cmath>
#include <json.hpp>

namespace mummi::losses {

namespace {
using dist::DiagGaussian;
using mssm::FilterResult;

/// Per-row KL of the step's joint posterior against the prior path: the s_c
/// factor in closed form plus a one-sample estimate of the s_f factor along
/// the sampled path. Fallback rows make the s_f factor exactly zero because
/// q_f and p_f are the same distribution there.
struct StepKl {
  Tensor combined;  // [B, 1]
  Tensor s_c_part;
  Tensor s_f_part;
};

StepKl step_kl(const mssm::FilterStep& step) {
  StepKl kl;
  kl.s_c_part = dist::kl_divergence(step.q_c, step.p_c);
  kl.s_f_part = dist::log_prob(step.q_f, step.state.s_f) - dist::log_prob(step.p_f, step.state.s_f);
  kl.combined = kl.s_c_part + kl.s_f_part;
  return kl;
}

Tensor clip_free_nats(const Tensor& kl_row, double free_nats) {
  if (free_nats <= 0.0) return kl_row;
  return diff::relu(kl_row - free_nats) + free_nats;
}

Tensor add_or_init(const Tensor& acc, const Tensor& term) {
  return acc.defined() ? acc + term : term;
}
}  // namespace

std::string LossBreakdown::metrics_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["total"] = total.scalar_value();
  j["reward_logprob"] = reward_logprob;
  j["kl"] = kl;
  j["kl_s_c"] = kl_s_c;
  j["kl_s_f"] = kl_s_f;
  j["contrastive"] = per_modality_contrastive;
  j["contrastive_accuracy"] = contrastive_accuracy;
  j["reconstruction"] = reconstruction;
  j["skipped_modalities"] = skipped_modalities;
  return j.dump();
}

LossBreakdown multimodal_elbo(const MssmModel& model, const Batch& batch, diff::Rng& noise,
                              const LossOptions& opts) {
  if (batch.batch_size < 1 || batch.seq_len < 1)
    throw diff::DiffError("multimodal_elbo: empty batch");
  const FilterResult filtered = model.filter_sequence(batch, noise);
  const auto& mods = model.config().modalities;
  const double scale = 1.0 / static_cast<double>(batch.batch_size * batch.seq_len);

  std::vector<Tensor> recon_sums(mods.size());
  Tensor reward_sum, kl_sum, kl_c_sum, kl_f_sum;
  for (diff::Index t = 0; t < batch.seq_len; ++t) {
    const auto& step = filtered.steps[static_cast<std::size_t>(t)];
    for (std::size_t m = 0; m < mods.size(); ++m) {
      if (!batch.observations[m].has_value()) continue;
      const DiagGaussian dec = model.decode_modality(m, step.state.h, step.state.s_c);
      const Tensor lp = dist::log_prob(dec, (*batch.observations[m])[static_cast<std::size_t>(t)]);
      recon_sums[m] = add_or_init(recon_sums[m], diff::sum(step.masks[m] * lp));
    }
    const DiagGaussian rew = model.predict_reward(step.state.h, step.state.s_c);
    reward_sum = add_or_init(reward_sum, diff::sum(dist::log_prob(rew, batch.rewards[static_cast<std::size_t>(t)])));
    const StepKl kl = step_kl(step);
    kl_sum = add_or_init(kl_sum, diff::sum(clip_free_nats(kl.combined, opts.free_nats)));
    kl_c_sum = add_or_init(kl_c_sum, diff::sum(kl.s_c_part));
    kl_f_sum = add_or_init(kl_f_sum, diff::sum(kl.s_f_part));
  }

  LossBreakdown out;
  out.variant = "elbo";
  Tensor recon_total;
  for (std::size_t m = 0; m < mods.size(); ++m) {
    if (recon_sums[m].defined()) {
      out.reconstruction[mods[m].name] = recon_sums[m].scalar_value() * scale;
      recon_total = add_or_init(recon_total, recon_sums[m]);
    } else {
      out.reconstruction[mods[m].name] = 0.0;
      out.skipped_modalities.push_back(mods[m].name);
    }
  }
  Tensor total = kl_sum - reward_sum;
  if (recon_total.defined()) total = total - recon_total;
  out.total = total * scale;
  out.reward_logprob = reward_sum.scalar_value() * scale;
  out.kl = kl_sum.scalar_value() * scale;
  out.kl_s_c = kl_c_sum.scalar_value() * scale;
  out.kl_s_f = kl_f_sum.scalar_value() * scale;
  return out;
}

Tensor density_ratio_score(const MssmModel& model, std::size_t modality, const Tensor& obs,
                           const Tensor& h, const Tensor& s_c) {
  const Tensor d = model.encode_modality(modality, obs).mean;
  const Tensor g = model.project_latent(h, s_c);
  return -diff::sum(diff::square(d - g));
}

Tensor mummi_b_score(const MssmModel& model, const Tensor& fused_mean, const Tensor& h,
                     const Tensor& s_c) {
  const Tensor g = model.project_latent(h, s_c);
  return -diff::sum(diff::square(fused_mean - g));
}

InfoNceResult infonce_from_embeddings(const Tensor& anchors, const Tensor& candidates,
                                      const std::vector<double>& mask) {
  InfoNceResult out;
  std::vector<diff::Index> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] != 0.0) idx.push_back(static_cast<diff::Index>(i));
  out.pool_size = static_cast<Index>(idx.size());
  if (idx.size() < 2) {
    out.skipped = true;
    return out;
  }

  const Tensor g = diff::take_rows(anchors, idx);
  const Tensor d = diff::take_rows(candidates, idx);
  // s_ij = -||g_i - d_j||^2, expanded so one matmul carries the cross terms.
  const Tensor cross = diff::matmul(g, diff::transpose(d));
  const Tensor g2 = diff::sum(diff::square(g), 1, /*keepdims=*/true);
  const Tensor d2 = diff::transpose(diff::sum(diff::square(d), 1, /*keepdims=*/true));
  const Tensor scores = cross * 2.0 - g2 - d2;

  const auto n = static_cast<diff::Index>(idx.size());
  std::vector<double> eye(static_cast<std::size_t>(n * n), 0.0);
  for (diff::Index i = 0; i < n; ++i) eye[static_cast<std::size_t>(i * n + i)] = 1.0;
  const Tensor identity = Tensor::from_values({n, n}, std::move(eye));

  const Tensor lse = diff::logsumexp(scores, 1, /*keepdims=*/true);
  const Tensor diag = diff::sum(scores * identity, 1, /*keepdims=*/true);
  out.loss = diff::mean(lse - diag);

  const auto sv = scores.values();
  diff::Index hits = 0;
  for (diff::Index i = 0; i < n; ++i) {
    diff::Index best = 0;
    double best_v = sv[static_cast<std::size_t>(i * n)];
    for (diff::Index j = 1; j < n; ++j) {
      const double v = sv[static_cast<std::size_t>(i * n + j)];
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    if (best == i) ++hits;
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(n);
  return out;
}

InfoNceResult infonce_per_modality(const MssmModel& model, std::size_t modality, const Tensor& h,
                                   const Tensor& s_c, const Tensor& obs,
                                   const std::vector<double>& mask) {
  const Tensor anchors = model.project_latent(h, s_c);
  const Tensor candidates = model.encode_modality(modality, obs).mean;
  return infonce_from_embeddings(anchors, candidates, mask);
}

MummiVariant variant_from_string(const std::string& s) {
  if (s == "mummi") return MummiVariant::kPerModality;
  if (s == "mummi-b") return MummiVariant::kFusedMean;
  throw diff::DiffError("unknown contrastive variant: " + s);
}

namespace {

/// Sequence-level ablation: candidate scores are summed over the candidate's
/// unmasked steps before the softmax over sequences.
InfoNceResult sequence_level_infonce(const std::vector<Tensor>& anchors_t,
                                     const std::vector<Tensor>& candidates_t,
                                     const std::vector<Tensor>& masks_t, diff::Index batch) {
  Tensor scores_sum;
  std::vector<double> candidate_steps(static_cast<std::size_t>(batch), 0.0);
  for (std::size_t t = 0; t < anchors_t.size(); ++t) {
    const Tensor& g = anchors_t[t];
    const Tensor& d = candidates_t[t];
    const Tensor cross = diff::matmul(g, diff::transpose(d));
    const Tensor g2 = diff::sum(diff::square(g), 1, true);
    const Tensor d2 = diff::transpose(diff::sum(diff::square(d), 1, true));
    const Tensor mask_row = diff::transpose(masks_t[t]);  // [1, B] over candidates
    const Tensor s = (cross * 2.0 - g2 - d2) * mask_row;
    scores_sum = scores_sum.defined() ? scores_sum + s : s;
    const auto mv = masks_t[t].values();
    for (diff::Index b = 0; b < batch; ++b) candidate_steps[static_cast<std::size_t>(b)] += mv[static_cast<std::size_t>(b)];
  }

  std::vector<diff::Index> idx;
  for (diff::Index b = 0; b < batch; ++b)
    if (candidate_steps[static_cast<std::size_t>(b)] > 0.0) idx.push_back(b);
  InfoNceResult out;
  out.pool_size = static_cast<Index>(idx.size());
  if (idx.size() < 2) {
    out.skipped = true;
    return out;
  }
  // Restrict both axes to sequences with at least one unmasked step.
  Tensor s = diff::take_rows(scores_sum, idx);
  s = diff::transpose(diff::take_rows(diff::transpose(s), idx));
  const auto n = static_cast<diff::Index>(idx.size());
  std::vector<double> eye(static_cast<std::size_t>(n * n), 0.0);
  for (diff::Index i = 0; i < n; ++i) eye[static_cast<std::size_t>(i * n + i)] = 1.0;
  const Tensor lse = diff::logsumexp(s, 1, true);
  const Tensor diag = diff::sum(s * Tensor::from_values({n, n}, std::move(eye)), 1, true);
  out.loss = diff::mean(lse - diag);

  const auto sv = s.values();
  diff::Index hits = 0;
  for (diff::Index i = 0; i < n; ++i) {
    diff::Index best = 0;
    double best_v = sv[static_cast<std::size_t>(i * n)];
    for (diff::Index j = 1; j < n; ++j)
      if (sv[static_cast<std::size_t>(i * n + j)] > best_v) {
        best_v = sv[static_cast<std::size_t>(i * n + j)];
        best = j;
      }
    if (best == i) ++hits;
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(n);
  return out;
}

}  // namespace

LossBreakdown mummi_total(const MssmModel& model, const Batch& batch,
                          const std::map<std::string, double>& modality_weights, diff::Rng& noise,
                          MummiVariant variant, const LossOptions& opts) {
  if (batch.batch_size < 1 || batch.seq_len < 1) throw diff::DiffError("mummi_total: empty batch");
  const FilterResult filtered = model.filter_sequence(batch, noise);
  const auto& mods = model.config().modalities;
  const double scale = 1.0 / static_cast<double>(batch.batch_size * batch.seq_len);

  // Projected latents per step; flattened pools are (t, b) ordered.
  std::vector<Tensor> anchors_t;
  anchors_t.reserve(static_cast<std::size_t>(batch.seq_len));
  Tensor reward_sum, kl_sum, kl_c_sum, kl_f_sum;
  for (diff::Index t = 0; t < batch.seq_len; ++t) {
    const auto& step = filtered.steps[static_cast<std::size_t>(t)];
    anchors_t.push_back(model.project_latent(step.state.h, step.state.s_c));
    const DiagGaussian rew = model.predict_reward(step.state.h, step.state.s_c);
    reward_sum = add_or_init(reward_sum, diff::sum(dist::log_prob(rew, batch.rewards[static_cast<std::size_t>(t)])));
    const StepKl kl = step_kl(step);
    kl_sum = add_or_init(kl_sum, diff::sum(clip_free_nats(kl.combined, opts.free_nats)));
    kl_c_sum = add_or_init(kl_c_sum, diff::sum(kl.s_c_part));
    kl_f_sum = add_or_init(kl_f_sum, diff::sum(kl.s_f_part));
  }
  const Tensor anchors = diff::concat(anchors_t, 0);

  LossBreakdown out;
  out.variant = variant == MummiVariant::kPerModality ? "mummi" : "mummi-b";
  Tensor contrastive_total;

  auto weight_of = [&](const std::string& name) {
    const auto it = modality_weights.find(name);
    return it == modality_weights.end() ? 1.0 : it->second;
  };

  if (variant == MummiVariant::kPerModality) {
    for (std::size_t m = 0; m < mods.size(); ++m) {
      const std::string& name = mods[m].name;
      const double weight = weight_of(name);
      bool have_expert = true;
      std::vector<Tensor> cand_t;
      std::vector<double> flat_mask;
      for (diff::Index t = 0; t < batch.seq_len; ++t) {
        const auto& step = filtered.steps[static_cast<std::size_t>(t)];
        if (!step.experts[m].has_value()) {
          have_expert = false;
          break;
        }
        cand_t.push_back(step.experts[m]->mean);
        for (double v : step.masks[m].values()) flat_mask.push_back(v);
      }
      InfoNceResult res;
      if (!have_expert) {
        res.skipped = true;
      } else if (opts.sequence_level_contrastive) {
        std::vector<Tensor> masks_t;
        for (diff::Index t = 0; t < batch.seq_len; ++t)
          masks_t.push_back(filtered.steps[static_cast<std::size_t>(t)].masks[m]);
        res = sequence_level_infonce(anchors_t, cand_t, masks_t, batch.batch_size);
      } else {
        res = infonce_from_embeddings(anchors, diff::concat(cand_t, 0), flat_mask);
      }
      if (res.skipped) {
        out.skipped_modalities.push_back(name);
        out.per_modality_contrastive[name] = 0.0;
        out.contrastive_accuracy[name] = 0.0;
        continue;
      }
      out.per_modality_contrastive[name] = res.loss.scalar_value();
      out.contrastive_accuracy[name] = res.accuracy;
      contrastive_total = add_or_init(contrastive_total, res.loss * weight);
    }
  } else {
    std::vector<Tensor> cand_t;
    std::vector<double> flat_mask;
    for (diff::Index t = 0; t < batch.seq_len; ++t) {
      const auto& step = filtered.steps[static_cast<std::size_t>(t)];
      cand_t.push_back(step.q_f.mean);
      for (double v : step.any_present.values()) flat_mask.push_back(v);
    }
    const InfoNceResult res = infonce_from_embeddings(anchors, diff::concat(cand_t, 0), flat_mask);
    if (res.skipped) {
      out.skipped_modalities.push_back("poe_fused");
      out.per_modality_contrastive["poe_fused"] = 0.0;
      out.contrastive_accuracy["poe_fused"] = 0.0;
    } else {
      out.per_modality_contrastive["poe_fused"] = res.loss.scalar_value();
      out.contrastive_accuracy["poe_fused"] = res.accuracy;
      contrastive_total = add_or_init(contrastive_total, res.loss * weight_of("poe_fused"));
    }
  }

  Tensor total = (kl_sum - reward_sum) * scale;
  if (contrastive_total.defined()) total = total + contrastive_total;
  out.total = total;
  out.reward_logprob = reward_sum.scalar_value() * scale;
  out.kl = kl_sum.scalar_value() * scale;
  out.kl_s_c = kl_c_sum.scalar_value() * scale;
  out.kl_s_f = kl_f_sum.scalar_value() * scale;
  return out;
}

double mi_lower_bound_estimate(double infonce_loss, Index n) {
  if (n < 2) throw diff::DiffError("mi_lower_bound_estimate: need n >= 2");
  return std::log(static_cast<double>(n)) - infonce_loss;
}

}  // namespace mummi::losses
