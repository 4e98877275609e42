#pragma once

#include <map>
#include <string>
#include <vector>

#include "mummi/mssm/model.hpp"

namespace mummi::losses {

using diff::Index;
using diff::Tensor;
using mssm::Batch;
using mssm::MssmModel;

struct LossOptions {
  double free_nats = 0.0;  // 0 disables KL clipping entirely
  bool sequence_level_contrastive = false;
};

/// One training objective evaluation. `total` is the scalar to minimize;
/// the reported parts satisfy, up to float roundoff:
///   elbo:   total = kl - sum(reconstruction) - reward_logprob
///   mummi:  total = sum_m weight_m * per_modality_contrastive_m + kl - reward_logprob
/// Reconstruction, reward and KL are averaged per (batch row, timestep);
/// contrastive terms are averaged over their positive pairs.
struct LossBreakdown {
  Tensor total;
  std::string variant;
  std::map<std::string, double> per_modality_contrastive;
  std::map<std::string, double> contrastive_accuracy;
  std::map<std::string, double> reconstruction;
  double reward_logprob = 0.0;
  double kl = 0.0;      // after optional free-nats clipping; the value inside total
  double kl_s_c = 0.0;  // diagnostic: closed-form factor
  double kl_s_f = 0.0;  // diagnostic: one-sample Monte Carlo factor
  std::vector<std::string> skipped_modalities;

  /// One JSONL metrics record.
  std::string metrics_json() const;
};

/// Reconstruction-based objective. Missing modalities contribute zero
/// reconstruction and are absent from the fusion inside the filter.
LossBreakdown multimodal_elbo(const MssmModel& model, const Batch& batch, diff::Rng& noise,
                              const LossOptions& opts = {});

/// log of the squared-exponential density-ratio kernel for one pair:
/// -||d_m(x) - g(z)||^2. Never exponentiated; InfoNCE consumes log scores.
Tensor density_ratio_score(const MssmModel& model, std::size_t modality, const Tensor& obs,
                           const Tensor& h, const Tensor& s_c);

/// Ablation score against the fused posterior mean instead of a single
/// modality expert.
Tensor mummi_b_score(const MssmModel& model, const Tensor& fused_mean, const Tensor& h,
                     const Tensor& s_c);

struct InfoNceResult {
  Tensor loss;           // scalar; defined only when !skipped
  double accuracy = 0.0; // top-1 over the unmasked pool
  Index pool_size = 0;
  bool skipped = false;  // fewer than 2 unmasked pairs
};

/// Softmax cross-entropy over scores between anchor embeddings (rows of
/// `anchors`) and candidate embeddings (rows of `candidates`), restricted to
/// indices with mask != 0. Row i's positive is candidate i; the other
/// unmasked rows are the negatives.
InfoNceResult infonce_from_embeddings(const Tensor& anchors, const Tensor& candidates,
                                      const std::vector<double>& mask);

/// Contrastive loss for one modality over flattened batch-time pairs.
/// Encodes the observations, projects the latents, and runs the pooled
/// softmax above.
InfoNceResult infonce_per_modality(const MssmModel& model, std::size_t modality, const Tensor& h,
                                   const Tensor& s_c, const Tensor& obs,
                                   const std::vector<double>& mask);

enum class MummiVariant { kPerModality, kFusedMean };
MummiVariant variant_from_string(const std::string& s);  // "mummi" | "mummi-b"

/// The contrastive training objective: per-modality InfoNCE terms (or the
/// single fused-mean term for the ablation) plus reward likelihood minus KL.
LossBreakdown mummi_total(const MssmModel& model, const Batch& batch,
                          const std::map<std::string, double>& modality_weights, diff::Rng& noise,
                          MummiVariant variant = MummiVariant::kPerModality,
                          const LossOptions& opts = {});

/// Diagnostic lower-bound estimate: log(N) - loss, always <= log(N).
double mi_lower_bound_estimate(double infonce_loss, Index n);

}  // namespace mummi::losses
