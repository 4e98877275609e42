#pragma once

#include <optional>

#include "mummi/agent/train_loop.hpp"

namespace mummi::cli {

using diff::Index;

/// Embeddings gathered from random-policy rollouts of a trained model:
/// per-modality expert means and stds, the fused posterior mean, the
/// projected latent, and the ground-truth position for every visited state.
struct EmbeddingDataset {
  std::vector<std::string> modality_names;
  std::vector<std::vector<double>> expert_mean;  // [M] of [N * F]
  std::vector<std::vector<double>> expert_std;   // [M] of [N * F]
  std::vector<double> fused_mean;                // [N * F]
  std::vector<double> projected;                 // [N * E]
  std::vector<double> positions;                 // [N * 2]
  Index n = 0;
  Index f_dim = 0;
  Index e_dim = 0;

  /// Mean expert std over all samples and components for one modality.
  double mean_expert_std(std::size_t m) const;
};

/// Rolls random-policy episodes and filters them online. `drop_modality`
/// excludes that modality from fusion for every step (its expert columns are
/// still recorded).
EmbeddingDataset collect_embeddings(const mssm::MssmModel& model,
                                    const envs::ToyWorldConfig& env_cfg, Index n_states,
                                    std::uint64_t seed,
                                    const std::optional<std::string>& drop_modality = std::nullopt);

/// Ridge-regression probe with a bias column: fit on the first 70% of rows,
/// return R^2 on the held-out 30% (aggregated over target columns).
double linear_probe_r2(const std::vector<double>& x, Index n, Index d, const std::vector<double>& y,
                       Index y_cols);

/// Top-2 principal axes of the row cloud.
struct Pca2 {
  std::vector<double> mean;   // [D]
  std::vector<double> basis;  // [D * 2], column-major axes
};
Pca2 fit_pca2(const std::vector<double>& x, Index n, Index d);
/// Projects rows of x (same D) onto the fitted axes -> [N * 2].
std::vector<double> apply_pca2(const Pca2& p, const std::vector<double>& x, Index n, Index d);

/// Mean Euclidean distance between two embedding sets, row by row.
double mean_row_distance(const std::vector<double>& a, const std::vector<double>& b, Index n,
                         Index d);

}  // namespace mummi::cli
