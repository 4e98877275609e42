#include "mummi/cli/run_config.hpp"

#include <json.hpp>

namespace mummi::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  std::string offenders;
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      if (!offenders.empty()) offenders += ", ";
      offenders += key;
    }
  }
  if (!offenders.empty())
    throw ConfigError("unknown config key(s) in " + where + ": " + offenders);
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

envs::ToyWorldConfig env_config_for(const std::string& env_name, envs::ToyWorldConfig base) {
  if (env_name == "toy2d") {
    base.modality_set = envs::ModalitySet::kPositionCamera;
  } else if (env_name == "toy2d-dualcam") {
    base.modality_set = envs::ModalitySet::kDualCamera;
  } else if (env_name == "toy2d-axes") {
    base.modality_set = envs::ModalitySet::kAxisSensors;
  } else {
    throw ConfigError("unknown env: " + env_name + " (expected toy2d | toy2d-dualcam | toy2d-axes)");
  }
  return base;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  reject_unknown(j, {"schema_version", "seed", "out_dir", "env", "model", "train"}, "top level");
  maybe(j, "schema_version", cfg.schema_version);
  if (cfg.schema_version != 1)
    throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
  maybe(j, "seed", cfg.seed);
  maybe(j, "out_dir", cfg.out_dir);

  if (j.contains("env")) {
    const json& e = j.at("env");
    reject_unknown(e,
                   {"name", "resolution", "position_noise_std", "distractor_amplitude",
                    "blob_sigma_px", "include_tactile", "episode_len", "goal", "step_size",
                    "goal_radius", "wall_contact_distance"},
                   "env");
    maybe(e, "name", cfg.env_name);
    maybe(e, "resolution", cfg.env.resolution);
    maybe(e, "position_noise_std", cfg.env.position_noise_std);
    maybe(e, "distractor_amplitude", cfg.env.distractor_amplitude);
    maybe(e, "blob_sigma_px", cfg.env.blob_sigma_px);
    maybe(e, "include_tactile", cfg.env.include_tactile);
    maybe(e, "episode_len", cfg.env.episode_len);
    if (e.contains("goal")) {
      const auto g = e.at("goal").get<std::vector<double>>();
      if (g.size() != 2) throw ConfigError("env.goal must be [x, y]");
      cfg.env.goal_x = g[0];
      cfg.env.goal_y = g[1];
    }
    maybe(e, "step_size", cfg.env.step_size);
    maybe(e, "goal_radius", cfg.env.goal_radius);
    maybe(e, "wall_contact_distance", cfg.env.wall_contact_distance);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m,
                   {"h_dim", "c_dim", "f_dim", "hidden", "std_min", "use_prior_expert",
                    "activation", "action_dim", "modalities"},
                   "model");
    maybe(m, "h_dim", cfg.model.h_dim);
    maybe(m, "c_dim", cfg.model.c_dim);
    maybe(m, "f_dim", cfg.model.f_dim);
    maybe(m, "hidden", cfg.model.hidden);
    maybe(m, "std_min", cfg.model.std_min);
    maybe(m, "use_prior_expert", cfg.model.use_prior_expert);
    maybe(m, "activation", cfg.model.activation);
    maybe(m, "action_dim", cfg.model.action_dim);
    if (m.contains("modalities")) {
      cfg.model.modalities.clear();
      for (const auto& jm : m.at("modalities")) {
        reject_unknown(jm, {"name", "obs_shape", "encoder_hidden"}, "model.modalities[]");
        mssm::ModalitySpec spec;
        spec.name = jm.at("name").get<std::string>();
        spec.obs_shape = jm.at("obs_shape").get<diff::Shape>();
        maybe(jm, "encoder_hidden", spec.encoder_hidden);
        cfg.model.modalities.push_back(std::move(spec));
      }
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(
        t, {"variant",           "batch_size",         "seq_len",
            "total_steps",       "model_updates",      "ac_updates",
            "imagination_horizon", "discount",         "td_lambda",
            "lr_model",          "lr_actor",           "lr_critic",
            "modality_weights",  "missing_rate",       "buffer_capacity",
            "prefill_episodes",  "explore_noise_std",  "explore_noise_final",
            "grad_clip",         "free_nats",          "sequence_level_contrastive",
            "eval_every",        "eval_episodes",      "checkpoint_every",
            "policy_hidden",     "offline_dir"},
        "train");
    maybe(t, "variant", cfg.train.variant);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "seq_len", cfg.train.seq_len);
    maybe(t, "total_steps", cfg.train.total_steps);
    maybe(t, "model_updates", cfg.train.model_updates);
    maybe(t, "ac_updates", cfg.train.ac_updates);
    maybe(t, "imagination_horizon", cfg.train.imagination_horizon);
    maybe(t, "discount", cfg.train.discount);
    maybe(t, "td_lambda", cfg.train.td_lambda);
    maybe(t, "lr_model", cfg.train.lr_model);
    maybe(t, "lr_actor", cfg.train.lr_actor);
    maybe(t, "lr_critic", cfg.train.lr_critic);
    maybe(t, "modality_weights", cfg.train.modality_weights);
    maybe(t, "missing_rate", cfg.train.missing_rate);
    maybe(t, "buffer_capacity", cfg.train.buffer_capacity);
    maybe(t, "prefill_episodes", cfg.train.prefill_episodes);
    maybe(t, "explore_noise_std", cfg.train.explore_noise_std);
    maybe(t, "explore_noise_final", cfg.train.explore_noise_final);
    maybe(t, "grad_clip", cfg.train.grad_clip);
    maybe(t, "free_nats", cfg.train.free_nats);
    maybe(t, "sequence_level_contrastive", cfg.train.sequence_level_contrastive);
    maybe(t, "eval_every", cfg.train.eval_every);
    maybe(t, "eval_episodes", cfg.train.eval_episodes);
    maybe(t, "checkpoint_every", cfg.train.checkpoint_every);
    maybe(t, "policy_hidden", cfg.train.policy_hidden);
    maybe(t, "offline_dir", cfg.train.offline_dir);
  }
  return cfg;
}

void RunConfig::finalize() {
  env = env_config_for(env_name, env);
  env.validate();
  envs::ToyWorld world(env);
  model.action_dim = world.action_dim();
  model.modalities = world.modality_specs();
  model.validate();
  train.seed = seed;
  train.validate();
}

std::string RunConfig::to_json_text() const {
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  json e;
  e["name"] = env_name;
  e["resolution"] = env.resolution;
  e["position_noise_std"] = env.position_noise_std;
  e["distractor_amplitude"] = env.distractor_amplitude;
  e["blob_sigma_px"] = env.blob_sigma_px;
  e["include_tactile"] = env.include_tactile;
  e["episode_len"] = env.episode_len;
  e["goal"] = {env.goal_x, env.goal_y};
  e["step_size"] = env.step_size;
  e["goal_radius"] = env.goal_radius;
  e["wall_contact_distance"] = env.wall_contact_distance;
  j["env"] = e;
  j["model"] = json::parse(model.to_json_string());
  json t;
  t["variant"] = train.variant;
  t["batch_size"] = train.batch_size;
  t["seq_len"] = train.seq_len;
  t["total_steps"] = train.total_steps;
  t["model_updates"] = train.model_updates;
  t["ac_updates"] = train.ac_updates;
  t["imagination_horizon"] = train.imagination_horizon;
  t["discount"] = train.discount;
  t["td_lambda"] = train.td_lambda;
  t["lr_model"] = train.lr_model;
  t["lr_actor"] = train.lr_actor;
  t["lr_critic"] = train.lr_critic;
  t["modality_weights"] = train.modality_weights;
  t["missing_rate"] = train.missing_rate;
  t["buffer_capacity"] = train.buffer_capacity;
  t["prefill_episodes"] = train.prefill_episodes;
  t["explore_noise_std"] = train.explore_noise_std;
  t["explore_noise_final"] = train.explore_noise_final;
  t["grad_clip"] = train.grad_clip;
  t["free_nats"] = train.free_nats;
  t["sequence_level_contrastive"] = train.sequence_level_contrastive;
  t["eval_every"] = train.eval_every;
  t["eval_episodes"] = train.eval_episodes;
  t["checkpoint_every"] = train.checkpoint_every;
  t["policy_hidden"] = train.policy_hidden;
  t["offline_dir"] = train.offline_dir;
  j["train"] = t;
  return j.dump(2);
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.train.total_steps = *o.steps;
  if (o.missing_rate) cfg.train.missing_rate = *o.missing_rate;
  if (o.variant) cfg.train.variant = *o.variant;
  if (o.env_name) cfg.env_name = *o.env_name;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.offline_dir) cfg.train.offline_dir = *o.offline_dir;
}

}  // namespace mummi::cli
