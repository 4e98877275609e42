#include "mummi/envs/toy_world.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

namespace mummi::envs {

using nlohmann::json;

ModalitySet modality_set_from_string(const std::string& s) {
  if (s == "position_camera") return ModalitySet::kPositionCamera;
  if (s == "dual_camera") return ModalitySet::kDualCamera;
  if (s == "axis_sensors") return ModalitySet::kAxisSensors;
  throw diff::DiffError("unknown modality set: " + s);
}

std::string modality_set_to_string(ModalitySet set) {
  switch (set) {
    case ModalitySet::kPositionCamera: return "position_camera";
    case ModalitySet::kDualCamera: return "dual_camera";
    case ModalitySet::kAxisSensors: return "axis_sensors";
  }
  return "position_camera";
}

void ToyWorldConfig::validate() const {
  if (resolution < 4) throw diff::DiffError("ToyWorldConfig: resolution must be >= 4");
  if (position_noise_std < 0.0 || distractor_amplitude < 0.0)
    throw diff::DiffError("ToyWorldConfig: noise levels must be >= 0");
  if (episode_len < 1) throw diff::DiffError("ToyWorldConfig: episode_len must be >= 1");
  if (goal_x < 0.0 || goal_x > 1.0 || goal_y < 0.0 || goal_y > 1.0)
    throw diff::DiffError("ToyWorldConfig: goal must lie in the unit square");
}

std::string ToyWorldConfig::to_json_string() const {
  json j;
  j["modality_set"] = modality_set_to_string(modality_set);
  j["goal_x"] = goal_x;
  j["goal_y"] = goal_y;
  j["resolution"] = resolution;
  j["position_noise_std"] = position_noise_std;
  j["distractor_amplitude"] = distractor_amplitude;
  j["blob_sigma_px"] = blob_sigma_px;
  j["include_tactile"] = include_tactile;
  j["episode_len"] = episode_len;
  j["step_size"] = step_size;
  j["goal_radius"] = goal_radius;
  j["wall_contact_distance"] = wall_contact_distance;
  return j.dump();
}

ToyWorldConfig ToyWorldConfig::from_json_string(const std::string& text) {
  const json j = json::parse(text);
  ToyWorldConfig c;
  c.modality_set = modality_set_from_string(j.at("modality_set").get<std::string>());
  c.goal_x = j.at("goal_x").get<double>();
  c.goal_y = j.at("goal_y").get<double>();
  c.resolution = j.at("resolution").get<diff::Index>();
  c.position_noise_std = j.at("position_noise_std").get<double>();
  c.distractor_amplitude = j.at("distractor_amplitude").get<double>();
  c.blob_sigma_px = j.at("blob_sigma_px").get<double>();
  c.include_tactile = j.at("include_tactile").get<bool>();
  c.episode_len = j.at("episode_len").get<diff::Index>();
  c.step_size = j.at("step_size").get<double>();
  c.goal_radius = j.at("goal_radius").get<double>();
  c.wall_contact_distance = j.at("wall_contact_distance").get<double>();
  c.validate();
  return c;
}

std::uint64_t ToyWorldConfig::fingerprint() const { return mssm::fnv1a(to_json_string()); }

namespace {

std::vector<double> render_blob_image(double cx, double cy, const ToyWorldConfig& cfg,
                                      std::uint64_t noise_seed) {
  const diff::Index res = cfg.resolution;
  std::vector<double> img(static_cast<std::size_t>(res * res));
  const double px = cx * static_cast<double>(res - 1);
  const double py = cy * static_cast<double>(res - 1);
  const double inv2s2 = 1.0 / (2.0 * cfg.blob_sigma_px * cfg.blob_sigma_px);
  diff::Rng noise(noise_seed);
  for (diff::Index r = 0; r < res; ++r) {
    for (diff::Index c = 0; c < res; ++c) {
      const double dx = static_cast<double>(c) - px;
      const double dy = static_cast<double>(r) - py;
      double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
      if (cfg.distractor_amplitude > 0.0) v += cfg.distractor_amplitude * noise.uniform();
      img[static_cast<std::size_t>(r * res + c)] = v;
    }
  }
  return img;
}

}  // namespace

ObsBundle render_modalities(const WorldState& s, const ToyWorldConfig& cfg) {
  ObsBundle out;
  switch (cfg.modality_set) {
    case ModalitySet::kPositionCamera:
      out["position"] = {s.x + cfg.position_noise_std * s.pos_noise[0],
                         s.y + cfg.position_noise_std * s.pos_noise[1]};
      out["camera"] = render_blob_image(s.x, s.y, cfg, s.render_seed);
      break;
    case ModalitySet::kDualCamera:
      out["cam_front"] = render_blob_image(s.x, s.y, cfg, s.render_seed);
      // rear view: the same scene seen from the opposite side
      out["cam_rear"] = render_blob_image(1.0 - s.x, 1.0 - s.y, cfg, s.render_seed ^ 0x9e3779b97f4a7c15ull);
      break;
    case ModalitySet::kAxisSensors:
      out["x_sensor"] = {s.x + cfg.position_noise_std * s.pos_noise[0]};
      out["y_sensor"] = {s.y + cfg.position_noise_std * s.pos_noise[1]};
      break;
  }
  if (cfg.include_tactile) {
    const double d = cfg.wall_contact_distance;
    out["tactile"] = {s.x <= d ? 1.0 : 0.0, s.x >= 1.0 - d ? 1.0 : 0.0, s.y <= d ? 1.0 : 0.0,
                      s.y >= 1.0 - d ? 1.0 : 0.0};
  }
  return out;
}

ToyWorld::ToyWorld(ToyWorldConfig config) : cfg_(std::move(config)), rng_(0) { cfg_.validate(); }

std::vector<mssm::ModalitySpec> ToyWorld::modality_specs() const {
  std::vector<mssm::ModalitySpec> specs;
  const diff::Shape image_shape{cfg_.resolution, cfg_.resolution};
  switch (cfg_.modality_set) {
    case ModalitySet::kPositionCamera:
      specs.push_back({"position", {2}, {32, 32}});
      specs.push_back({"camera", image_shape, {64, 64}});
      break;
    case ModalitySet::kDualCamera:
      specs.push_back({"cam_front", image_shape, {64, 64}});
      specs.push_back({"cam_rear", image_shape, {64, 64}});
      break;
    case ModalitySet::kAxisSensors:
      specs.push_back({"x_sensor", {1}, {32, 32}});
      specs.push_back({"y_sensor", {1}, {32, 32}});
      break;
  }
  if (cfg_.include_tactile) specs.push_back({"tactile", {4}, {32}});
  return specs;
}

void ToyWorld::draw_state_noise() {
  state_.pos_noise[0] = rng_.normal();
  state_.pos_noise[1] = rng_.normal();
  state_.render_seed = rng_.next_u64();
}

double ToyWorld::state_reward() const {
  const double dx = state_.x - cfg_.goal_x;
  const double dy = state_.y - cfg_.goal_y;
  const double dist = std::sqrt(dx * dx + dy * dy);
  return -dist + (dist < cfg_.goal_radius ? 1.0 : 0.0);
}

StepResult ToyWorld::reset(std::uint64_t seed) {
  rng_ = diff::Rng(seed);
  state_ = WorldState{};
  state_.x = rng_.uniform();
  state_.y = rng_.uniform();
  state_.t = 0;
  draw_state_noise();
  StepResult out;
  out.observation = render_modalities(state_, cfg_);
  out.reward = 0.0;
  out.done = false;
  const double dx = state_.x - cfg_.goal_x, dy = state_.y - cfg_.goal_y;
  out.goal_distance = std::sqrt(dx * dx + dy * dy);
  return out;
}

StepResult ToyWorld::step(const std::vector<double>& action) {
  if (action.size() != 2) throw diff::DiffError("ToyWorld::step: action must be 2-D");
  const double ax = std::clamp(action[0], -1.0, 1.0);
  const double ay = std::clamp(action[1], -1.0, 1.0);
  state_.x = std::clamp(state_.x + cfg_.step_size * ax, 0.0, 1.0);
  state_.y = std::clamp(state_.y + cfg_.step_size * ay, 0.0, 1.0);
  state_.t += 1;
  draw_state_noise();

  StepResult out;
  out.reward = state_reward();
  const double dx = state_.x - cfg_.goal_x, dy = state_.y - cfg_.goal_y;
  out.goal_distance = std::sqrt(dx * dx + dy * dy);
  out.done = state_.t >= cfg_.episode_len;
  out.observation = render_modalities(state_, cfg_);
  return out;
}

EnvPolicy uniform_random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<diff::Rng>(seed);
  return [rng](const ObsBundle&, diff::Index) {
    return std::vector<double>{rng->uniform(-1.0, 1.0), rng->uniform(-1.0, 1.0)};
  };
}

Episode collect_episode(ToyWorld& env, const EnvPolicy& policy, const MissingnessModel& missingness,
                        std::uint64_t env_seed, const std::string& policy_tag) {
  const auto specs = env.modality_specs();
  const diff::Index T = env.config().episode_len;

  Episode ep;
  ep.length = T;
  ep.action_dim = env.action_dim();
  ep.seed = env_seed;
  ep.env_fingerprint = env.config().fingerprint();
  ep.policy_tag = policy_tag;
  for (const auto& s : specs) {
    ep.modality_names.push_back(s.name);
    ep.obs_shapes[s.name] = s.obs_shape;
    ep.observations[s.name].reserve(static_cast<std::size_t>(T * s.flat_dim()));
  }
  ep.actions.reserve(static_cast<std::size_t>(T * ep.action_dim));
  ep.rewards.reserve(static_cast<std::size_t>(T));

  StepResult cur = env.reset(env_seed);
  for (diff::Index t = 0; t < T; ++t) {
    for (const auto& s : specs) {
      const auto& v = cur.observation.at(s.name);
      ep.observations[s.name].insert(ep.observations[s.name].end(), v.begin(), v.end());
    }
    auto action = policy(cur.observation, t);
    for (auto& a : action) a = std::clamp(a, -1.0, 1.0);
    ep.actions.insert(ep.actions.end(), action.begin(), action.end());
    cur = env.step(action);
    ep.rewards.push_back(cur.reward);
  }

  MissingnessModel mm = missingness;
  const auto present = generate_masks(mm, T, static_cast<diff::Index>(specs.size()));
  for (std::size_t m = 0; m < specs.size(); ++m) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(T));
    for (diff::Index t = 0; t < T; ++t) mask[static_cast<std::size_t>(t)] = present[m][static_cast<std::size_t>(t)] ? 1 : 0;
    ep.masks[specs[m].name] = std::move(mask);
  }
  ep.validate();
  return ep;
}

}  // namespace mummi::envs
