#include "mummi/cli/analysis.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace mummi::cli {

double EmbeddingDataset::mean_expert_std(std::size_t m) const {
  const auto& s = expert_std.at(m);
  double sum = 0.0;
  for (double v : s) sum += v;
  return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

EmbeddingDataset collect_embeddings(const mssm::MssmModel& model,
                                    const envs::ToyWorldConfig& env_cfg, Index n_states,
                                    std::uint64_t seed,
                                    const std::optional<std::string>& drop_modality) {
  diff::NoGradScope no_grad;
  const auto& cfg = model.config();
  EmbeddingDataset ds;
  ds.f_dim = cfg.f_dim;
  ds.e_dim = cfg.embed_dim();
  for (const auto& m : cfg.modalities) ds.modality_names.push_back(m.name);
  ds.expert_mean.resize(cfg.modalities.size());
  ds.expert_std.resize(cfg.modalities.size());

  std::optional<std::size_t> drop_idx;
  if (drop_modality) drop_idx = cfg.modality_index(*drop_modality);

  envs::ToyWorld env(env_cfg);
  diff::Rng seeder(seed);
  while (ds.n < n_states) {
    const std::uint64_t env_seed = seeder.next_u64();
    const std::uint64_t noise_seed = seeder.next_u64();
    auto policy = envs::uniform_random_policy(seeder.next_u64());
    diff::Rng noise(noise_seed);

    auto state = model.initial_state(1);
    std::vector<double> prev_action(static_cast<std::size_t>(cfg.action_dim), 0.0);
    auto cur = env.reset(env_seed);
    for (diff::Index t = 0; t < env_cfg.episode_len && ds.n < n_states; ++t) {
      std::vector<std::optional<diff::Tensor>> obs(cfg.modalities.size());
      std::vector<diff::Tensor> masks(cfg.modalities.size());
      for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
        const auto& name = cfg.modalities[m].name;
        obs[m] = diff::Tensor::from_values({1, cfg.modalities[m].flat_dim()}, cur.observation.at(name));
        const bool active = !(drop_idx && *drop_idx == m);
        masks[m] = diff::Tensor::from_values({1, 1}, {active ? 1.0 : 0.0});
      }
      const auto a_prev = diff::Tensor::from_values({1, cfg.action_dim}, prev_action);
      const auto step = model.filter_step(state.h, state.s_c, a_prev, obs, masks, noise);
      state = step.state;

      for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
        const auto mv = step.experts[m]->mean.values();
        const auto sv = step.experts[m]->std.values();
        ds.expert_mean[m].insert(ds.expert_mean[m].end(), mv.begin(), mv.end());
        ds.expert_std[m].insert(ds.expert_std[m].end(), sv.begin(), sv.end());
      }
      const auto fv = step.q_f.mean.values();
      ds.fused_mean.insert(ds.fused_mean.end(), fv.begin(), fv.end());
      const diff::Tensor proj = model.project_latent(state.h, state.s_c);
      ds.projected.insert(ds.projected.end(), proj.values().begin(), proj.values().end());
      ds.positions.push_back(env.state().x);
      ds.positions.push_back(env.state().y);
      ++ds.n;

      auto action = policy(cur.observation, t);
      cur = env.step(action);
      prev_action = action;
    }
  }
  return ds;
}

double linear_probe_r2(const std::vector<double>& x, Index n, Index d, const std::vector<double>& y,
                       Index y_cols) {
  if (n < 10) throw diff::DiffError("linear_probe_r2: need at least 10 rows");
  const Index train_n = (n * 7) / 10;
  const Index test_n = n - train_n;

  using Mat = Eigen::MatrixXd;
  Mat xtr(train_n, d + 1), xte(test_n, d + 1);
  Mat ytr(train_n, y_cols), yte(test_n, y_cols);
  for (Index i = 0; i < n; ++i) {
    const bool tr = i < train_n;
    Mat& xm = tr ? xtr : xte;
    Mat& ym = tr ? ytr : yte;
    const Index r = tr ? i : i - train_n;
    for (Index j = 0; j < d; ++j) xm(r, j) = x[static_cast<std::size_t>(i * d + j)];
    xm(r, d) = 1.0;
    for (Index j = 0; j < y_cols; ++j) ym(r, j) = y[static_cast<std::size_t>(i * y_cols + j)];
  }
  Mat gram = xtr.transpose() * xtr;
  gram.diagonal().array() += 1e-6;  // ridge
  const Mat w = gram.ldlt().solve(xtr.transpose() * ytr);
  const Mat pred = xte * w;

  const Eigen::RowVectorXd mean = yte.colwise().mean();
  double sse = 0.0, sst = 0.0;
  for (Index i = 0; i < test_n; ++i) {
    for (Index j = 0; j < y_cols; ++j) {
      const double e = yte(i, j) - pred(i, j);
      const double c = yte(i, j) - mean(j);
      sse += e * e;
      sst += c * c;
    }
  }
  if (sst == 0.0) return 0.0;
  return 1.0 - sse / sst;
}

Pca2 fit_pca2(const std::vector<double>& x, Index n, Index d) {
  Pca2 identity;
  if (d == 2) {  // already two-dimensional; keep coordinates as-is
    identity.mean = {0.0, 0.0};
    identity.basis = {1.0, 0.0, 0.0, 1.0};
    return identity;
  }
  using Mat = Eigen::MatrixXd;
  Mat m(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = x[static_cast<std::size_t>(i * d + j)];
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  const Mat cov = (m.transpose() * m) / static_cast<double>(n > 1 ? n - 1 : 1);
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);

  Pca2 out;
  out.mean.assign(mean.data(), mean.data() + static_cast<std::ptrdiff_t>(d));
  out.basis.resize(static_cast<std::size_t>(d * 2));
  // eigenvalues ascend; take the last two columns
  for (Index j = 0; j < d; ++j) {
    out.basis[static_cast<std::size_t>(j * 2 + 0)] = eig.eigenvectors()(j, d - 1);
    out.basis[static_cast<std::size_t>(j * 2 + 1)] = d >= 2 ? eig.eigenvectors()(j, d - 2) : 0.0;
  }
  return out;
}

std::vector<double> apply_pca2(const Pca2& p, const std::vector<double>& x, Index n, Index d) {
  std::vector<double> out(static_cast<std::size_t>(n * 2), 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < 2; ++k) {
      double s = 0.0;
      for (Index j = 0; j < d; ++j)
        s += (x[static_cast<std::size_t>(i * d + j)] - p.mean[static_cast<std::size_t>(j)]) *
             p.basis[static_cast<std::size_t>(j * 2 + k)];
      out[static_cast<std::size_t>(i * 2 + k)] = s;
    }
  }
  return out;
}

double mean_row_distance(const std::vector<double>& a, const std::vector<double>& b, Index n,
                         Index d) {
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double sq = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double diff = a[static_cast<std::size_t>(i * d + j)] - b[static_cast<std::size_t>(i * d + j)];
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(n);
}

}  // namespace mummi::cli
