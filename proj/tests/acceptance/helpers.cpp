#include "helpers.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

namespace acceptance {

envs::ToyWorldConfig toy2d_env() {
  envs::ToyWorldConfig cfg;
  cfg.modality_set = envs::ModalitySet::kPositionCamera;
  cfg.resolution = 16;
  cfg.position_noise_std = 0.01;
  cfg.distractor_amplitude = 0.1;
  cfg.episode_len = 100;
  return cfg;
}

mssm::MssmConfig toy2d_model(const envs::ToyWorldConfig& env) {
  mssm::MssmConfig cfg;
  cfg.h_dim = 64;
  cfg.c_dim = 16;
  cfg.f_dim = 32;
  cfg.hidden = {64, 64};
  cfg.modalities = envs::ToyWorld(env).modality_specs();
  return cfg;
}

TrainedRun train_toy2d(const std::string& variant, std::uint64_t seed, const std::string& tag,
                       bool representation_only) {
  const auto env = toy2d_env();
  const auto model = toy2d_model(env);

  agent::TrainConfig tc;
  tc.variant = variant;
  tc.batch_size = 8;
  tc.seq_len = 25;
  tc.model_updates = 6;
  tc.imagination_horizon = 12;
  tc.missing_rate = 0.375;
  tc.buffer_capacity = 250;
  tc.eval_every = 65;
  tc.eval_episodes = 4;
  tc.checkpoint_every = 65;
  tc.seed = seed;
  if (representation_only) {
    tc.total_steps = 195;
    tc.prefill_episodes = 200;  // every episode collected by the random policy
    tc.ac_updates = 0;
  } else {
    tc.total_steps = 195;
    tc.prefill_episodes = 5;  // 5 + 195 = 200 collected episodes
    tc.ac_updates = 3;
  }

  const std::string run_dir = "acceptance_runs/" + tag;
  std::filesystem::remove_all(run_dir);
  const std::string run_json = std::string("{\"model\": ") + model.to_json_string() + "}";

  const auto t0 = std::chrono::steady_clock::now();
  TrainedRun out;
  out.result = agent::train_loop(tc, env, run_dir, run_json, false);
  out.minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  out.run_dir = run_dir;
  out.checkpoint = out.result.checkpoint_path;
  return out;
}

RepresentationReport representation_report(const mssm::MssmModel& model,
                                           const envs::ToyWorldConfig& env, std::uint64_t seed) {
  RepresentationReport rep;
  const auto ds = cli::collect_embeddings(model, env, 2000, seed);
  const std::size_t pos = 0, cam = 1;  // toy2d modality order
  rep.probe_r2_position =
      cli::linear_probe_r2(ds.expert_mean[pos], ds.n, ds.f_dim, ds.positions, 2);
  rep.probe_r2_camera = cli::linear_probe_r2(ds.expert_mean[cam], ds.n, ds.f_dim, ds.positions, 2);
  rep.cross_modal_distance =
      cli::mean_row_distance(ds.expert_mean[pos], ds.expert_mean[cam], ds.n, ds.f_dim);
  rep.calibration_ratio = ds.mean_expert_std(cam) / ds.mean_expert_std(pos);

  const auto dropped = cli::collect_embeddings(model, env, 2000, seed + 1, std::string("position"));
  rep.probe_r2_fused_position_dropped =
      cli::linear_probe_r2(dropped.fused_mean, dropped.n, dropped.f_dim, dropped.positions, 2);
  return rep;
}

void criterion_line(const std::string& id, bool pass, const std::string& detail) {
  std::printf("[criterion %s] %s — %s\n", id.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

}  // namespace acceptance
