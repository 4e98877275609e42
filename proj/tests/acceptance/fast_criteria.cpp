#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "helpers.hpp"
#include "mummi/agent/adam.hpp"
#include "mummi/cli/commands.hpp"
#include "mummi/diff/grad_check.hpp"
#include "mummi/losses/losses.hpp"
#include "oracles.hpp"

using namespace mummi;
using acceptance::criterion_line;
using diff::Tensor;

namespace fs = std::filesystem;

TEST_SUITE_BEGIN("fast");

TEST_CASE("criterion 1: gradient fidelity of both training objectives") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = cli::gradcheck_model_config(8, 4, 6);
  diff::Rng init(7);
  mssm::MssmModel model(cfg, init);
  const auto batch = cli::make_synthetic_batch(cfg, 2, 3, 11);
  const auto params = model.params().tensors();

  const auto mummi = diff::grad_check(
      [&] {
        diff::Rng noise(101);
        return losses::mummi_total(model, batch, {}, noise).total;
      },
      params);
  const auto elbo = diff::grad_check(
      [&] {
        diff::Rng noise(101);
        return losses::multimodal_elbo(model, batch, noise).total;
      },
      params);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool pass = mummi.max_rel_error < 1e-4 && elbo.max_rel_error < 1e-4 && seconds < 30.0;
  std::ostringstream detail;
  detail << "mummi rel err " << mummi.max_rel_error << ", elbo rel err " << elbo.max_rel_error
         << ", " << seconds << " s over " << mummi.checked + elbo.checked << " entries";
  criterion_line("1", pass, detail.str());
  CHECK(mummi.max_rel_error < 1e-4);
  CHECK(elbo.max_rel_error < 1e-4);
  CHECK(seconds < 30.0);
}

TEST_CASE("criterion 2: PoE fusion matches grid-normalized density products") {
  diff::Rng rng(2);
  double worst_tv = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(2));  // pairs and triples
    std::vector<dist::DiagGaussian> experts;
    std::vector<oracles::Gauss1d> oracle_experts;
    for (int i = 0; i < k; ++i) {
      const double mean = rng.uniform(-2.0, 2.0);
      const double std = rng.uniform(0.3, 2.0);
      experts.emplace_back(Tensor::from_values({1}, {mean}), Tensor::from_values({1}, {std}));
      oracle_experts.push_back({mean, std});
    }
    const auto fused = dist::poe_fuse(experts);
    const double tv = oracles::product_grid_tv(
        oracle_experts, {fused.mean.scalar_value(), fused.std.scalar_value()});
    worst_tv = std::max(worst_tv, tv);
  }
  const bool pass = worst_tv < 1e-6;
  criterion_line("2", pass, "max total-variation distance " + std::to_string(worst_tv) +
                                " over 200 random pairs/triples");
  CHECK(worst_tv < 1e-6);
}

TEST_CASE("criterion 3: closed-form KL within Monte Carlo error bars") {
  diff::Rng rng(33);
  int failures = 0;
  double worst_sigma = 0.0;
  const std::size_t samples = 1'000'000;
  for (int pair = 0; pair < 50; ++pair) {
    const double qm = rng.uniform(-2, 2), qs = rng.uniform(0.3, 2.0);
    const double pm = rng.uniform(-2, 2), ps = rng.uniform(0.3, 2.0);
    const double closed =
        dist::kl_divergence(dist::DiagGaussian(Tensor::scalar(qm), Tensor::scalar(qs)),
                            dist::DiagGaussian(Tensor::scalar(pm), Tensor::scalar(ps)))
            .scalar_value();
    const auto normals = rng.normal_vector(samples);
    const auto mc = oracles::mc_kl_diag({qm}, {qs}, {pm}, {ps}, normals, samples);
    const double sigmas = std::abs(closed - mc.value) / mc.std_error;
    worst_sigma = std::max(worst_sigma, sigmas);
    if (sigmas >= 3.0) ++failures;
  }
  criterion_line("3", failures == 0,
                 "50 pairs x 1e6 samples, worst deviation " + std::to_string(worst_sigma) +
                     " standard errors");
  CHECK(failures == 0);
}

TEST_CASE("criterion 4: InfoNCE degenerate values and bound tightness") {
  const auto t0 = std::chrono::steady_clock::now();

  // constant scores -> loss = log N
  const diff::Index n_const = 48;
  const auto flat = losses::infonce_from_embeddings(
      Tensor::zeros({n_const, 4}), Tensor::zeros({n_const, 4}),
      std::vector<double>(static_cast<std::size_t>(n_const), 1.0));
  const double const_gap = std::abs(flat.loss.scalar_value() - std::log(static_cast<double>(n_const)));

  // the estimate never exceeds log N on random batches
  diff::Rng rng(4);
  bool bound_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const diff::Index n = 4 + rng.uniform_index(13);
    const auto a = Tensor::from_values({n, 3}, rng.normal_vector(static_cast<std::size_t>(3 * n)));
    const auto c = Tensor::from_values({n, 3}, rng.normal_vector(static_cast<std::size_t>(3 * n)));
    const auto res =
        losses::infonce_from_embeddings(a, c, std::vector<double>(static_cast<std::size_t>(n), 1.0));
    bound_ok = bound_ok && losses::mi_lower_bound_estimate(res.loss.scalar_value(), res.pool_size) <=
                               std::log(static_cast<double>(n)) + 1e-12;
  }

  // correlated Gaussian pair with exactly 1 nat of mutual information:
  // rho^2 = 1 - e^{-2}; a trained linear critic should recover most of it
  const double rho = std::sqrt(1.0 - std::exp(-2.0));
  const diff::Index batch = 256, embed = 4;
  mssm::ParamRegistry reg;
  diff::Rng init(5);
  mssm::Linear enc_x(reg, "enc_x", 1, embed, init);
  mssm::Linear enc_y(reg, "enc_y", 1, embed, init);
  agent::Adam opt(reg, {.lr = 1e-2});

  diff::Rng data_rng(6);
  auto draw_batch = [&](Tensor& xs, Tensor& ys) {
    std::vector<double> xv(static_cast<std::size_t>(batch)), yv(static_cast<std::size_t>(batch));
    for (diff::Index i = 0; i < batch; ++i) {
      const double x = data_rng.normal();
      xv[static_cast<std::size_t>(i)] = x;
      yv[static_cast<std::size_t>(i)] = rho * x + std::sqrt(1.0 - rho * rho) * data_rng.normal();
    }
    xs = Tensor::from_values({batch, 1}, std::move(xv));
    ys = Tensor::from_values({batch, 1}, std::move(yv));
  };

  const std::vector<double> full_mask(static_cast<std::size_t>(batch), 1.0);
  for (int step = 0; step < 1500; ++step) {
    Tensor xs, ys;
    draw_batch(xs, ys);
    diff::Tape tape;
    diff::TapeScope scope(tape);
    const auto res = losses::infonce_from_embeddings(enc_y(ys), enc_x(xs), full_mask);
    tape.backward(res.loss);
    opt.step();
    opt.zero_grad();
  }
  double eval_loss = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    Tensor xs, ys;
    draw_batch(xs, ys);
    eval_loss += losses::infonce_from_embeddings(enc_y(ys), enc_x(xs), full_mask).loss.scalar_value();
  }
  eval_loss /= 50.0;
  const double estimate = losses::mi_lower_bound_estimate(eval_loss, batch);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool pass = const_gap < 1e-9 && bound_ok && estimate >= 0.7 && estimate <= 1.0;
  std::ostringstream detail;
  detail << "constant-score gap " << const_gap << ", bound held on 1000 batches, trained estimate "
         << estimate << " nats (true 1.0), " << seconds << " s";
  criterion_line("4", pass, detail.str());
  CHECK(const_gap < 1e-9);
  CHECK(bound_ok);
  CHECK(estimate >= 0.7);
  CHECK(estimate <= 1.0);
}

TEST_CASE("criterion 5: lambda returns against brute-force k-step mixtures") {
  diff::Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto h = static_cast<std::size_t>(1 + rng.uniform_index(5));
    const auto rewards = rng.uniform_vector(h, -2.0, 2.0);
    const auto values = rng.uniform_vector(h + 1, -2.0, 2.0);
    const double gamma = rng.uniform(0.05, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const auto fast = agent::lambda_returns(rewards, values, gamma, lambda);
    const auto slow = oracles::brute_force_lambda_returns(rewards, values, gamma, lambda);
    for (std::size_t t = 0; t < h; ++t) worst = std::max(worst, std::abs(fast[t] - slow[t]));
  }

  // collapse identities hold exactly
  const std::vector<double> r{0.7, -0.3, 1.1};
  const std::vector<double> v{0.2, 0.5, -0.1, 0.9};
  const auto td = agent::lambda_returns(r, v, 0.9, 0.0);
  const auto mc = agent::lambda_returns(r, v, 0.9, 1.0);
  bool collapse = true;
  for (std::size_t t = 0; t < 3; ++t) {
    collapse = collapse && td[t] == r[t] + 0.9 * v[t + 1];
    double tail = v[3];
    for (std::size_t k = 3; k-- > t;) tail = r[k] + 0.9 * tail;
    collapse = collapse && std::abs(mc[t] - tail) < 1e-15;
  }

  const bool pass = worst < 1e-10 && collapse;
  criterion_line("5", pass, "1000 random draws (H <= 5), worst abs deviation " + std::to_string(worst));
  CHECK(worst < 1e-10);
  CHECK(collapse);
}

TEST_CASE("criterion 9: masking protocol hits exact counts and rates") {
  bool exact_ok = true;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto masks = envs::generate_masks({0.375, seed}, 96, 2);
    for (const auto& row : masks) {
      int dropped = 0;
      for (bool p : row) dropped += p ? 0 : 1;
      exact_ok = exact_ok && dropped == 36;
    }
  }
  double worst_rate_err = 0.0;
  for (const double rate : {0.375, 0.75}) {
    const diff::Index T = 96;
    double dropped = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto masks = envs::generate_masks({rate, seed}, T, 1);
      for (bool p : masks[0]) dropped += p ? 0.0 : 1.0;
    }
    worst_rate_err = std::max(worst_rate_err,
                              std::abs(dropped / (1000.0 * static_cast<double>(T)) - rate));
  }
  const bool pass = exact_ok && worst_rate_err < 1e-3;
  criterion_line("9", pass, "exact per-episode counts, worst empirical rate error " +
                                std::to_string(worst_rate_err));
  CHECK(exact_ok);
  CHECK(worst_rate_err < 1e-3);
}

TEST_CASE("criterion 11: persistence round-trips and bit-exact resume") {
  // episode archive round-trip
  envs::ToyWorldConfig env_cfg = acceptance::toy2d_env();
  env_cfg.episode_len = 30;
  envs::ToyWorld env(env_cfg);
  const auto ep = envs::collect_episode(env, envs::uniform_random_policy(3), {0.375, 7}, 11);
  const auto ep_path = fs::temp_directory_path() / "acceptance_ep.bin";
  envs::save_episode(ep_path.string(), ep);
  const auto ep2 = envs::load_episode(ep_path.string());
  bool episode_ok = ep2.actions == ep.actions && ep2.rewards == ep.rewards;
  for (const auto& name : ep.modality_names) {
    episode_ok = episode_ok && ep2.observations.at(name) == ep.observations.at(name);
    episode_ok = episode_ok && ep2.masks.at(name) == ep.masks.at(name);
  }
  fs::remove(ep_path);

  // checkpoint round-trip
  const auto model_cfg = cli::gradcheck_model_config(8, 4, 6);
  diff::Rng init(13);
  mssm::MssmModel model(model_cfg, init);
  mssm::Checkpoint ck;
  ck.config_json = model_cfg.to_json_string();
  ck.config_fingerprint = model_cfg.fingerprint();
  ck.add_section("model", model.params());
  const auto ck_path = fs::temp_directory_path() / "acceptance_ck.bin";
  mssm::save_checkpoint(ck_path.string(), ck);
  const auto ck2 = mssm::load_checkpoint(ck_path.string());
  bool ckpt_ok = ck2.config_fingerprint == model_cfg.fingerprint();
  {
    diff::Rng other_init(14);
    mssm::MssmModel other(model_cfg, other_init);
    ck2.apply_section("model", other.params());
    const auto& a = model.params().named();
    const auto& b = other.params().named();
    for (std::size_t i = 0; i < a.size() && ckpt_ok; ++i)
      for (std::size_t j = 0; j < a[i].second.values().size(); ++j)
        if (a[i].second.values()[j] != b[i].second.values()[j]) {
          ckpt_ok = false;
          break;
        }
  }
  fs::remove(ck_path);

  // resumed training reproduces the next-step losses bit for bit
  const std::string dir_a = "acceptance_runs/resume_a";
  const std::string dir_b = "acceptance_runs/resume_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  envs::ToyWorldConfig small_env;
  small_env.episode_len = 12;
  small_env.resolution = 6;
  agent::TrainConfig tc;
  tc.total_steps = 3;
  tc.batch_size = 2;
  tc.seq_len = 6;
  tc.model_updates = 2;
  tc.ac_updates = 1;
  tc.imagination_horizon = 3;
  tc.prefill_episodes = 1;
  tc.buffer_capacity = 8;
  tc.eval_every = 0;
  tc.checkpoint_every = 1;
  tc.policy_hidden = {8};
  tc.seed = 21;
  mssm::MssmConfig small_model;
  small_model.h_dim = 8;
  small_model.c_dim = 4;
  small_model.f_dim = 6;
  small_model.hidden = {8};
  small_model.modalities = envs::ToyWorld(small_env).modality_specs();
  for (auto& m : small_model.modalities) m.encoder_hidden = {8};
  const std::string run_json = std::string("{\"model\": ") + small_model.to_json_string() + "}";

  const auto full = agent::train_loop(tc, small_env, dir_a, run_json, false);
  fs::create_directories(dir_b);
  fs::copy(dir_a, dir_b, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  fs::copy_file(dir_b + "/checkpoint_step_2.bin", dir_b + "/checkpoint_latest.bin",
                fs::copy_options::overwrite_existing);
  fs::remove(dir_b + "/metrics.jsonl");
  const auto resumed = agent::train_loop(tc, small_env, dir_b, run_json, true);

  auto step2_totals = [](const std::string& dir) {
    std::vector<double> out;
    std::ifstream is(dir + "/metrics.jsonl");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.at("phase") == "model" && j.at("step") == 2) out.push_back(j.at("total").get<double>());
    }
    return out;
  };
  const auto ta = step2_totals(dir_a);
  const auto tb = step2_totals(dir_b);
  bool resume_ok = !full.diverged && !resumed.diverged && !ta.empty() && ta.size() == tb.size();
  for (std::size_t i = 0; resume_ok && i < ta.size(); ++i) resume_ok = ta[i] == tb[i];
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  const bool pass = episode_ok && ckpt_ok && resume_ok;
  criterion_line("11", pass,
                 std::string("episode archive bit-exact: ") + (episode_ok ? "yes" : "no") +
                     ", checkpoint bit-exact: " + (ckpt_ok ? "yes" : "no") +
                     ", resume next-step losses identical: " + (resume_ok ? "yes" : "no"));
  CHECK(episode_ok);
  CHECK(ckpt_ok);
  CHECK(resume_ok);
}

TEST_SUITE_END();
