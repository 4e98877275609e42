#include "mummi/agent/train_loop.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>

#include "mummi/mssm/checkpoint.hpp"
#include "mummi/util/parallel.hpp"

namespace mummi::agent {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (variant != "mummi" && variant != "mummi-b" && variant != "elbo")
    throw diff::DiffError("TrainConfig: unknown variant " + variant);
  if (batch_size < 1 || seq_len < 1 || total_steps < 0)
    throw diff::DiffError("TrainConfig: batch_size, seq_len must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw diff::DiffError("TrainConfig: discount must be in (0, 1]");
  if (td_lambda < 0.0 || td_lambda > 1.0) throw diff::DiffError("TrainConfig: td_lambda must be in [0, 1]");
  if (imagination_horizon < 1) throw diff::DiffError("TrainConfig: imagination_horizon must be >= 1");
  if (missing_rate < 0.0 || missing_rate > 1.0)
    throw diff::DiffError("TrainConfig: missing_rate must be in [0, 1]");
  for (const auto& [name, w] : modality_weights)
    if (w < 0.0) throw diff::DiffError("TrainConfig: negative weight for modality " + name);
}

OnlineFilter::OnlineFilter(const MssmModel& model, std::uint64_t noise_seed)
    : model_(&model), noise_(noise_seed) {
  reset();
}

void OnlineFilter::reset() {
  const auto init = model_->initial_state(1);
  h_ = init.h;
  s_c_ = init.s_c;
}

void OnlineFilter::observe(const envs::ObsBundle& obs, const std::vector<bool>& present,
                           const std::vector<double>& prev_action) {
  diff::NoGradScope no_grad;
  const auto& mods = model_->config().modalities;
  std::vector<std::optional<Tensor>> obs_t(mods.size());
  std::vector<Tensor> masks(mods.size());
  for (std::size_t m = 0; m < mods.size(); ++m) {
    const auto it = obs.find(mods[m].name);
    const bool have = it != obs.end() && present[m];
    masks[m] = Tensor::from_values({1, 1}, {have ? 1.0 : 0.0});
    if (it != obs.end())
      obs_t[m] = Tensor::from_values({1, mods[m].flat_dim()}, it->second);
  }
  const Tensor a_prev = Tensor::from_values({1, model_->config().action_dim}, prev_action);
  const auto step = model_->filter_step(h_, s_c_, a_prev, obs_t, masks, noise_);
  h_ = step.state.h;
  s_c_ = step.state.s_c;
}

EvalResult evaluate_policy(const MssmModel& model, const Policy& policy,
                           const envs::ToyWorldConfig& env_cfg, Index episodes,
                           double missing_rate, std::uint64_t seed, bool use_cem,
                           const CemOptions* cem_opts) {
  diff::Rng seeder(seed);
  struct EpisodeSeeds {
    std::uint64_t env, mask, filter, cem;
  };
  std::vector<EpisodeSeeds> seeds(static_cast<std::size_t>(episodes));
  for (auto& s : seeds) s = {seeder.next_u64(), seeder.next_u64(), seeder.next_u64(), seeder.next_u64()};

  std::vector<double> returns(static_cast<std::size_t>(episodes), 0.0);
  std::vector<double> masked_steps(static_cast<std::size_t>(episodes), 0.0);
  const Index T = env_cfg.episode_len;

  util::parallel_for(static_cast<std::size_t>(episodes), [&](std::size_t e) {
    envs::ToyWorld env(env_cfg);
    const auto specs = env.modality_specs();
    const auto m_count = static_cast<Index>(specs.size());
    const auto present =
        envs::generate_masks({missing_rate, seeds[e].mask}, T, m_count);
    double masked = 0.0;
    for (const auto& row : present)
      for (bool p : row) masked += p ? 0.0 : 1.0;
    masked_steps[e] = masked / static_cast<double>(T * m_count);

    OnlineFilter filter(model, seeds[e].filter);
    diff::Rng cem_rng(seeds[e].cem);
    std::vector<double> prev_action(static_cast<std::size_t>(env.action_dim()), 0.0);
    auto cur = env.reset(seeds[e].env);
    double total = 0.0;
    for (Index t = 0; t < T; ++t) {
      std::vector<bool> flags(specs.size());
      for (std::size_t m = 0; m < specs.size(); ++m) flags[m] = present[m][static_cast<std::size_t>(t)];
      filter.observe(cur.observation, flags, prev_action);
      std::vector<double> action;
      if (use_cem) {
        CemOptions opts = cem_opts ? *cem_opts : CemOptions{};
        action = cem_plan(model, filter.h(), filter.s_c(), opts, cem_rng);
      } else {
        diff::NoGradScope no_grad;
        const Tensor mu = policy.mean(filter.h(), filter.s_c());
        action.assign(mu.values().begin(), mu.values().end());
      }
      for (auto& a : action) a = std::clamp(a, -1.0, 1.0);
      cur = env.step(action);
      total += cur.reward;
      prev_action = action;
    }
    returns[e] = total;
  });

  EvalResult out;
  out.episodes = episodes;
  double sum = 0.0;
  for (double r : returns) sum += r;
  out.mean_return = sum / static_cast<double>(episodes);
  double var = 0.0;
  for (double r : returns) var += (r - out.mean_return) * (r - out.mean_return);
  out.std_return = episodes > 1 ? std::sqrt(var / static_cast<double>(episodes)) : 0.0;
  double mf = 0.0;
  for (double m : masked_steps) mf += m;
  out.masked_fraction = mf / static_cast<double>(episodes);
  return out;
}

namespace {

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : os_(path, std::ios::app) {
    if (!os_) throw diff::DiffError("cannot open metrics file " + path);
  }
  void write(json record) {
    os_ << record.dump() << "\n";
    os_.flush();
  }

 private:
  std::ofstream os_;
};

std::string episode_file(const std::string& run_dir, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep_%06zu.bin", index);
  return run_dir + "/episodes/" + buf;
}

json breakdown_to_json(const losses::LossBreakdown& lb) {
  json j;
  j["variant"] = lb.variant;
  j["total"] = lb.total.scalar_value();
  j["reward_logprob"] = lb.reward_logprob;
  j["kl"] = lb.kl;
  j["kl_s_c"] = lb.kl_s_c;
  j["kl_s_f"] = lb.kl_s_f;
  j["contrastive"] = lb.per_modality_contrastive;
  j["contrastive_accuracy"] = lb.contrastive_accuracy;
  j["reconstruction"] = lb.reconstruction;
  j["skipped_modalities"] = lb.skipped_modalities;
  return j;
}

}  // namespace

TrainResult train_loop(const TrainConfig& cfg, const envs::ToyWorldConfig& env_cfg,
                       const std::string& run_dir, const std::string& run_config_json,
                       bool resume) {
  cfg.validate();
  env_cfg.validate();
  fs::create_directories(run_dir + "/episodes");

  envs::ToyWorld env(env_cfg);
  mssm::MssmConfig model_cfg;
  // The caller's model dims arrive through the run config; fall back to
  // defaults when absent.
  {
    const json rc = json::parse(run_config_json.empty() ? "{}" : run_config_json);
    if (rc.contains("model")) model_cfg = mssm::MssmConfig::from_json_string(rc.at("model").dump());
  }
  if (model_cfg.modalities.empty()) model_cfg.modalities = env.modality_specs();

  const mssm::Activation act = mssm::activation_from_string(model_cfg.activation);
  diff::Rng init_model(cfg.seed ^ 0x6d6f64656cull);
  diff::Rng init_actor(cfg.seed ^ 0x6163746f72ull);
  diff::Rng init_value(cfg.seed ^ 0x76616c7565ull);
  MssmModel model(model_cfg, init_model);
  Policy policy(model_cfg.h_dim, model_cfg.c_dim, model_cfg.action_dim, cfg.policy_hidden, act,
                init_actor);
  ValueNet value(model_cfg.h_dim, model_cfg.c_dim, cfg.policy_hidden, act, init_value);

  Adam adam_model(model.params(), {.lr = cfg.lr_model});
  Adam adam_actor(policy.params(), {.lr = cfg.lr_actor});
  Adam adam_critic(value.params(), {.lr = cfg.lr_critic});

  diff::Rng rng_train(cfg.seed ^ 0x747261696eull);
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  Index start_step = 0;
  std::size_t episodes_saved = 0;

  const std::string ckpt_path = run_dir + "/checkpoint_latest.bin";
  if (resume) {
    if (!fs::exists(ckpt_path)) throw diff::DiffError("resume requested but no checkpoint at " + ckpt_path);
    const auto ckpt = mssm::load_checkpoint(ckpt_path);
    if (ckpt.config_fingerprint != model_cfg.fingerprint())
      throw diff::DiffError("resume: checkpoint model config does not match the requested config");
    ckpt.apply_section("model", model.params());
    ckpt.apply_section("policy", policy.params());
    ckpt.apply_section("value", value.params());
    adam_model.load_state(ckpt, "adam_model");
    adam_actor.load_state(ckpt, "adam_actor");
    adam_critic.load_state(ckpt, "adam_critic");
    rng_train.deserialize(ckpt.meta.at("rng_train"));
    start_step = static_cast<Index>(std::stoll(ckpt.meta.at("step")));
    episodes_saved = static_cast<std::size_t>(std::stoull(ckpt.meta.at("episodes_saved")));
    const std::size_t reload_from =
        episodes_saved > static_cast<std::size_t>(cfg.buffer_capacity)
            ? episodes_saved - static_cast<std::size_t>(cfg.buffer_capacity)
            : 0;
    for (std::size_t i = reload_from; i < episodes_saved; ++i)
      buffer.add(envs::load_episode(episode_file(run_dir, i)));
  }

  const bool offline = !cfg.offline_dir.empty();
  if (offline) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(cfg.offline_dir))
      if (entry.path().extension() == ".bin") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw diff::DiffError("offline dir " + cfg.offline_dir + " has no episodes");
    for (const auto& f : files) buffer.add(envs::load_episode(f));
  }

  MetricsWriter metrics(run_dir + "/metrics.jsonl");

  auto save_ckpt = [&](Index completed_steps) {
    mssm::Checkpoint ckpt;
    ckpt.config_json = run_config_json;
    ckpt.config_fingerprint = model_cfg.fingerprint();
    ckpt.add_section("model", model.params());
    ckpt.add_section("policy", policy.params());
    ckpt.add_section("value", value.params());
    adam_model.save_state(ckpt, "adam_model");
    adam_actor.save_state(ckpt, "adam_actor");
    adam_critic.save_state(ckpt, "adam_critic");
    ckpt.meta["schema"] = "1";
    ckpt.meta["step"] = std::to_string(completed_steps);
    ckpt.meta["episodes_saved"] = std::to_string(episodes_saved);
    ckpt.meta["rng_train"] = rng_train.serialize();
    ckpt.meta["model_config"] = model_cfg.to_json_string();
    ckpt.meta["env_config"] = env_cfg.to_json_string();
    json ph = cfg.policy_hidden;
    ckpt.meta["policy_hidden"] = ph.dump();
    ckpt.meta["variant"] = cfg.variant;
    const std::string tmp = ckpt_path + ".tmp";
    mssm::save_checkpoint(tmp, ckpt);
    fs::rename(tmp, ckpt_path);
    fs::copy_file(ckpt_path, run_dir + "/checkpoint_step_" + std::to_string(completed_steps) + ".bin",
                  fs::copy_options::overwrite_existing);
  };

  auto collect_one = [&](bool random_policy, double explore_std) {
    const std::uint64_t env_seed = rng_train.next_u64();
    const std::uint64_t mask_seed = rng_train.next_u64();
    const std::uint64_t policy_seed = rng_train.next_u64();
    envs::EnvPolicy pol;
    std::string tag;
    if (random_policy) {
      pol = envs::uniform_random_policy(policy_seed);
      tag = "random";
    } else {
      auto filter = std::make_shared<OnlineFilter>(model, policy_seed);
      auto explore_rng = std::make_shared<diff::Rng>(policy_seed ^ 0x6578706cull);
      auto prev = std::make_shared<std::vector<double>>(
          static_cast<std::size_t>(model_cfg.action_dim), 0.0);
      const std::vector<bool> all_present(model_cfg.modalities.size(), true);
      pol = [&, filter, explore_rng, prev, explore_std, all_present](const envs::ObsBundle& obs,
                                                                     Index) {
        filter->observe(obs, all_present, *prev);
        diff::NoGradScope no_grad;
        const Tensor mu = policy.mean(filter->h(), filter->s_c());
        std::vector<double> a(mu.values().begin(), mu.values().end());
        for (auto& v : a) v = std::clamp(v + explore_std * explore_rng->normal(), -1.0, 1.0);
        *prev = a;
        return a;
      };
      tag = "actor";
    }
    auto ep = envs::collect_episode(env, pol, {cfg.missing_rate, mask_seed}, env_seed, tag);
    const double ret = ep.total_reward();
    save_episode(episode_file(run_dir, episodes_saved), ep);
    ++episodes_saved;
    buffer.add(std::move(ep));
    return ret;
  };

  TrainResult result;
  result.checkpoint_path = ckpt_path;

  try {
    if (!offline && !resume) {
      for (Index i = 0; i < cfg.prefill_episodes; ++i) {
        const double ret = collect_one(/*random_policy=*/true, 0.0);
        metrics.write({{"step", -1},
                       {"phase", "prefill"},
                       {"episode_return", ret},
                       {"missing_rate", cfg.missing_rate}});
      }
    }

    for (Index step = start_step; step < cfg.total_steps; ++step) {
      if (!offline) {
        const double frac = cfg.total_steps > 1
                                ? static_cast<double>(step) / static_cast<double>(cfg.total_steps - 1)
                                : 1.0;
        const double explore_std =
            cfg.explore_noise_std + (cfg.explore_noise_final - cfg.explore_noise_std) * frac;
        const bool use_random = buffer.total_added() < static_cast<std::size_t>(cfg.prefill_episodes);
        const double ret = collect_one(use_random, explore_std);
        metrics.write({{"step", step},
                       {"phase", "collect"},
                       {"episode_return", ret},
                       {"missing_rate", cfg.missing_rate},
                       {"explore_std", explore_std}});
      }

      for (Index u = 0; u < cfg.model_updates; ++u) {
        const auto batch = buffer.sample_batch(model_cfg, cfg.batch_size, cfg.seq_len, rng_train);
        diff::Rng noise(rng_train.next_u64());
        diff::Tape tape;
        losses::LossBreakdown lb;
        {
          diff::TapeScope scope(tape);
          const losses::LossOptions opts{cfg.free_nats, cfg.sequence_level_contrastive};
          if (cfg.variant == "elbo") {
            lb = losses::multimodal_elbo(model, batch, noise, opts);
          } else {
            lb = losses::mummi_total(model, batch, cfg.modality_weights, noise,
                                     losses::variant_from_string(cfg.variant), opts);
          }
        }
        if (!std::isfinite(lb.total.scalar_value()))
          throw TrainDivergence("non-finite world-model loss at step " + std::to_string(step));
        tape.backward(lb.total);
        auto params = model.params().tensors();
        const double norm = clip_grad_norm(params, cfg.grad_clip);
        adam_model.step();
        adam_model.zero_grad();
        json rec = breakdown_to_json(lb);
        rec["step"] = step;
        rec["phase"] = "model";
        rec["update"] = u;
        rec["grad_norm"] = norm;
        rec["grad_clipped"] = norm > cfg.grad_clip;
        metrics.write(rec);
      }

      for (Index u = 0; u < cfg.ac_updates; ++u) {
        const auto batch = buffer.sample_batch(model_cfg, cfg.batch_size, cfg.seq_len, rng_train);
        diff::Rng noise(rng_train.next_u64());
        mssm::FilterResult filtered;
        {
          diff::NoGradScope no_grad;
          filtered = model.filter_sequence(batch, noise);
        }
        std::vector<Tensor> hs, cs;
        for (const auto& s : filtered.steps) {
          hs.push_back(s.state.h);
          cs.push_back(s.state.s_c);
        }
        diff::NoGradScope no_grad_concat;  // flattening only; updates manage their own tapes
        const Tensor start_h = diff::concat(hs, 0);
        const Tensor start_c = diff::concat(cs, 0);
        const AcUpdateConfig ac{cfg.imagination_horizon, cfg.discount, cfg.td_lambda, cfg.grad_clip};
        diff::Rng ac_rng(rng_train.next_u64());
        const auto m = actor_critic_update(model, policy, value, start_h, start_c, ac, adam_actor,
                                           adam_critic, ac_rng);
        metrics.write({{"step", step},
                       {"phase", "actor_critic"},
                       {"update", u},
                       {"actor_loss", m.actor_loss},
                       {"critic_loss", m.critic_loss},
                       {"mean_target", m.mean_target},
                       {"actor_grad_norm", m.actor_grad_norm},
                       {"critic_grad_norm", m.critic_grad_norm}});
      }

      const bool last = step + 1 == cfg.total_steps;
      if (cfg.eval_every > 0 && ((step + 1) % cfg.eval_every == 0 || last)) {
        for (const double rate : {0.0, 0.375, 0.75}) {
          const auto ev = evaluate_policy(model, policy, env_cfg, cfg.eval_episodes, rate,
                                          rng_train.next_u64());
          if (rate == 0.0) result.final_eval_mean = ev.mean_return;
          metrics.write({{"step", step},
                         {"phase", "eval"},
                         {"missing_rate", rate},
                         {"episode_return", ev.mean_return},
                         {"episode_return_std", ev.std_return},
                         {"masked_fraction", ev.masked_fraction},
                         {"episodes", ev.episodes}});
        }
      }
      if (cfg.checkpoint_every > 0 && ((step + 1) % cfg.checkpoint_every == 0 || last)) {
        save_ckpt(step + 1);
      }
      result.steps_completed = step + 1;
    }
    if (cfg.total_steps == 0) save_ckpt(0);
  } catch (const TrainDivergence& e) {
    metrics.write({{"step", result.steps_completed}, {"phase", "divergence"}, {"error", e.what()}});
    result.diverged = true;
  } catch (const diff::DomainError& e) {
    metrics.write({{"step", result.steps_completed}, {"phase", "divergence"}, {"error", e.what()}});
    result.diverged = true;
  }
  return result;
}

LoadedAgent load_agent(const std::string& checkpoint_path) {
  const auto ckpt = mssm::load_checkpoint(checkpoint_path);
  LoadedAgent out;
  out.run_config_json = ckpt.config_json;
  out.meta = ckpt.meta;
  out.model_cfg = mssm::MssmConfig::from_json_string(ckpt.meta.at("model_config"));
  out.env_cfg = envs::ToyWorldConfig::from_json_string(ckpt.meta.at("env_config"));
  const auto policy_hidden = json::parse(ckpt.meta.at("policy_hidden")).get<std::vector<Index>>();
  const auto act = mssm::activation_from_string(out.model_cfg.activation);

  diff::Rng dummy(0);
  out.model = std::make_unique<MssmModel>(out.model_cfg, dummy);
  out.policy = std::make_unique<Policy>(out.model_cfg.h_dim, out.model_cfg.c_dim,
                                        out.model_cfg.action_dim, policy_hidden, act, dummy);
  out.value = std::make_unique<ValueNet>(out.model_cfg.h_dim, out.model_cfg.c_dim, policy_hidden,
                                         act, dummy);
  ckpt.apply_section("model", out.model->params());
  ckpt.apply_section("policy", out.policy->params());
  ckpt.apply_section("value", out.value->params());
  return out;
}

}  // namespace mummi::agent
