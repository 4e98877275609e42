#include "mummi/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "mummi/cli/analysis.hpp"
#include "mummi/cli/png.hpp"
#include "mummi/diff/grad_check.hpp"

namespace mummi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

RunConfig load_run_config(const std::string& config_path, const Overrides& overrides) {
  RunConfig cfg = config_path.empty() ? RunConfig::defaults()
                                      : RunConfig::from_json_text(read_file(config_path));
  apply_overrides(cfg, overrides);
  cfg.finalize();
  return cfg;
}

}  // namespace

int cmd_train(const TrainCmdOptions& opts) {
  RunConfig cfg;
  try {
    cfg = load_run_config(opts.config_path, opts.overrides);
  } catch (const diff::DiffError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    fs::create_directories(cfg.out_dir);
    const std::string effective = cfg.to_json_text();
    std::ofstream(cfg.out_dir + "/config.json", std::ios::trunc) << effective << "\n";

    const auto result = agent::train_loop(cfg.train, cfg.env, cfg.out_dir, effective, opts.resume);
    if (result.diverged) {
      std::cerr << "training diverged after " << result.steps_completed
                << " steps; last checkpoint kept at " << result.checkpoint_path << "\n";
      return kExitRuntime;
    }
    std::cout << "trained " << result.steps_completed << " steps; checkpoint at "
              << result.checkpoint_path << "; eval return (0% missing) " << result.final_eval_mean
              << "\n";
    return kExitOk;
  } catch (const diff::DiffError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_eval(const EvalCmdOptions& opts) {
  try {
    if (opts.missing_rate < 0.0 || opts.missing_rate > 1.0)
      throw ConfigError("missing rate must be in [0, 1]");
    auto loaded = agent::load_agent(opts.checkpoint);
    const auto ev = agent::evaluate_policy(*loaded.model, *loaded.policy, loaded.env_cfg,
                                           opts.episodes, opts.missing_rate, opts.seed,
                                           opts.use_cem);
    json report;
    report["checkpoint"] = opts.checkpoint;
    report["missing_rate"] = opts.missing_rate;
    report["episodes"] = ev.episodes;
    report["mean_return"] = ev.mean_return;
    report["std_return"] = ev.std_return;
    report["masked_fraction"] = ev.masked_fraction;
    report["policy"] = opts.use_cem ? "cem" : "actor";
    std::cout << report.dump(2) << "\n";
    if (!opts.report_path.empty()) std::ofstream(opts.report_path, std::ios::trunc) << report.dump(2) << "\n";
    return kExitOk;
  } catch (const diff::DiffError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_viz_latent(const VizCmdOptions& opts) {
  try {
    auto loaded = agent::load_agent(opts.checkpoint);
    const auto ds = collect_embeddings(*loaded.model, loaded.env_cfg, opts.samples, opts.seed);
    fs::create_directories(opts.out_dir);

    const Pca2 pca = fit_pca2(ds.fused_mean, ds.n, ds.f_dim);
    std::ofstream csv(opts.out_dir + "/latents.csv", std::ios::trunc);
    csv << "kind,proj_x,proj_y,true_x,true_y\n";

    auto export_kind = [&](const std::string& kind, const std::vector<double>& embeddings) {
      const auto proj = apply_pca2(pca, embeddings, ds.n, ds.f_dim);
      double lo_x = proj[0], hi_x = proj[0], lo_y = proj[1], hi_y = proj[1];
      for (Index i = 0; i < ds.n; ++i) {
        lo_x = std::min(lo_x, proj[static_cast<std::size_t>(i * 2)]);
        hi_x = std::max(hi_x, proj[static_cast<std::size_t>(i * 2)]);
        lo_y = std::min(lo_y, proj[static_cast<std::size_t>(i * 2 + 1)]);
        hi_y = std::max(hi_y, proj[static_cast<std::size_t>(i * 2 + 1)]);
      }
      std::vector<double> norm(static_cast<std::size_t>(ds.n * 2));
      std::vector<std::uint8_t> colors(static_cast<std::size_t>(ds.n * 3));
      for (Index i = 0; i < ds.n; ++i) {
        const double px = proj[static_cast<std::size_t>(i * 2)];
        const double py = proj[static_cast<std::size_t>(i * 2 + 1)];
        const double tx = ds.positions[static_cast<std::size_t>(i * 2)];
        const double ty = ds.positions[static_cast<std::size_t>(i * 2 + 1)];
        csv << kind << ',' << px << ',' << py << ',' << tx << ',' << ty << "\n";
        norm[static_cast<std::size_t>(i * 2)] = hi_x > lo_x ? (px - lo_x) / (hi_x - lo_x) : 0.5;
        norm[static_cast<std::size_t>(i * 2 + 1)] = hi_y > lo_y ? (py - lo_y) / (hi_y - lo_y) : 0.5;
        colors[static_cast<std::size_t>(i * 3)] = static_cast<std::uint8_t>(tx * 255.0);
        colors[static_cast<std::size_t>(i * 3 + 1)] = static_cast<std::uint8_t>(ty * 255.0);
        colors[static_cast<std::size_t>(i * 3 + 2)] = 128;
      }
      write_scatter_png(opts.out_dir + "/latent_" + kind + ".png", norm, colors);
    };

    for (std::size_t m = 0; m < ds.modality_names.size(); ++m)
      export_kind(ds.modality_names[m], ds.expert_mean[m]);
    export_kind("fused", ds.fused_mean);

    json calib;
    for (std::size_t m = 0; m < ds.modality_names.size(); ++m)
      calib["mean_expert_std"][ds.modality_names[m]] = ds.mean_expert_std(m);
    if (ds.modality_names.size() == 2) {
      const double r = ds.mean_expert_std(1) / ds.mean_expert_std(0);
      calib["calibration_ratio"] = r;
      calib["calibration_ratio_of"] = ds.modality_names[1] + "/" + ds.modality_names[0];
      std::cout << "calibration ratio " << calib["calibration_ratio_of"].get<std::string>() << " = "
                << r << "\n";
    }
    std::ofstream(opts.out_dir + "/calibration.json", std::ios::trunc) << calib.dump(2) << "\n";
    std::cout << "wrote " << ds.n << " samples x " << (ds.modality_names.size() + 1)
              << " kinds to " << opts.out_dir << "\n";
    return kExitOk;
  } catch (const diff::DiffError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

mssm::MssmConfig gradcheck_model_config(diff::Index h_dim, diff::Index c_dim, diff::Index f_dim) {
  mssm::MssmConfig cfg;
  cfg.h_dim = h_dim;
  cfg.c_dim = c_dim;
  cfg.f_dim = f_dim;
  cfg.hidden = {8};
  cfg.action_dim = 2;
  cfg.modalities = {{"position", {2}, {8}}, {"camera", {4, 4}, {8}}};
  return cfg;
}

mssm::Batch make_synthetic_batch(const mssm::MssmConfig& cfg, diff::Index batch_size,
                                 diff::Index seq_len, std::uint64_t seed) {
  diff::Rng rng(seed);
  mssm::Batch b;
  b.batch_size = batch_size;
  b.seq_len = seq_len;
  for (const auto& m : cfg.modalities) {
    std::vector<diff::Tensor> obs, masks;
    for (diff::Index t = 0; t < seq_len; ++t) {
      obs.push_back(diff::Tensor::from_values(
          {batch_size, m.flat_dim()},
          rng.uniform_vector(static_cast<std::size_t>(batch_size * m.flat_dim()), -1.0, 1.0)));
      masks.push_back(diff::Tensor::ones({batch_size, 1}));
    }
    b.observations.emplace_back(std::move(obs));
    b.masks.push_back(std::move(masks));
  }
  for (diff::Index t = 0; t < seq_len; ++t) {
    b.actions.push_back(diff::Tensor::from_values(
        {batch_size, cfg.action_dim},
        rng.uniform_vector(static_cast<std::size_t>(batch_size * cfg.action_dim), -1.0, 1.0)));
    b.rewards.push_back(diff::Tensor::from_values(
        {batch_size, 1}, rng.uniform_vector(static_cast<std::size_t>(batch_size), -1.0, 1.0)));
  }
  return b;
}

int cmd_gradcheck(const GradcheckCmdOptions& opts) {
  try {
    const auto cfg = gradcheck_model_config(opts.h_dim, opts.c_dim, opts.f_dim);
    diff::Rng init(7);
    mssm::MssmModel model(cfg, init);
    const auto batch = make_synthetic_batch(cfg, 2, 3, 11);
    const auto params = model.params().tensors();

    struct Case {
      const char* name;
      std::function<diff::Tensor()> f;
    };
    const std::map<std::string, double> weights;
    const std::vector<Case> cases = {
        {"mummi",
         [&]() {
           diff::Rng noise(101);  // frozen reparameterization noise
           return losses::mummi_total(model, batch, weights, noise).total;
         }},
        {"elbo",
         [&]() {
           diff::Rng noise(101);
           return losses::multimodal_elbo(model, batch, noise).total;
         }},
    };

    bool ok = true;
    for (const auto& c : cases) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = diff::grad_check(c.f, params, opts.eps);
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0).count();
      const auto& worst = model.params().named()[result.worst_param];
      std::cout << c.name << ": max relative error " << result.max_rel_error << " over "
                << result.checked << " entries (worst: " << worst.first << "["
                << result.worst_element << "]), " << ms << " ms\n";
      ok = ok && result.max_rel_error < opts.threshold;
    }
    std::cout << (ok ? "PASS" : "FAIL") << " (threshold " << opts.threshold << ")\n";
    return ok ? kExitOk : kExitRuntime;
  } catch (const diff::DiffError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_gen_data(const GenDataCmdOptions& opts) {
  try {
    RunConfig base = opts.config_path.empty() ? RunConfig::defaults()
                                              : RunConfig::from_json_text(read_file(opts.config_path));
    base.env_name = opts.env_name;
    base.finalize();
    envs::ToyWorld env(base.env);
    fs::create_directories(opts.out_dir);

    diff::Rng seeder(opts.seed);
    double total_reward = 0.0;
    for (diff::Index e = 0; e < opts.episodes; ++e) {
      const std::uint64_t env_seed = seeder.next_u64();
      const std::uint64_t mask_seed = seeder.next_u64();
      const std::uint64_t policy_seed = seeder.next_u64();
      auto ep = envs::collect_episode(env, envs::uniform_random_policy(policy_seed),
                                      {opts.missing_rate, mask_seed}, env_seed);
      total_reward += ep.total_reward();
      char name[32];
      std::snprintf(name, sizeof(name), "ep_%06lld.bin", static_cast<long long>(e));
      envs::save_episode(opts.out_dir + "/" + name, ep);
    }
    json manifest;
    manifest["episodes"] = opts.episodes;
    manifest["missing_rate"] = opts.missing_rate;
    manifest["seed"] = opts.seed;
    manifest["policy"] = "random";
    manifest["env"] = json::parse(base.env.to_json_string());
    manifest["env_name"] = opts.env_name;
    std::ofstream(opts.out_dir + "/manifest.json", std::ios::trunc) << manifest.dump(2) << "\n";
    std::cout << "wrote " << opts.episodes << " episodes to " << opts.out_dir
              << " (mean return " << total_reward / static_cast<double>(opts.episodes) << ")\n";
    return kExitOk;
  } catch (const diff::DiffError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace mummi::cli
