#pragma once

#include <map>
#include <memory>

#include "mummi/envs/episode.hpp"
#include "mummi/envs/missingness.hpp"
#include "mummi/mssm/config.hpp"

namespace mummi::envs {

using ObsBundle = std::map<std::string, std::vector<double>>;

enum class ModalitySet {
  kPositionCamera,  // noisy (x, y) + overhead blob image
  kDualCamera,      // front and rear blob images
  kAxisSensors,     // independent x and y scalar sensors
};

ModalitySet modality_set_from_string(const std::string& s);
std::string modality_set_to_string(ModalitySet set);

/// Point robot in the unit square reaching toward a fixed goal. Dynamics are
/// deterministic given seed and actions; sensor noise draws live in the state
/// so rendering stays a pure function of (state, config).
struct ToyWorldConfig {
  ModalitySet modality_set = ModalitySet::kPositionCamera;
  double goal_x = 0.5;
  double goal_y = 0.5;
  diff::Index resolution = 16;       // camera is resolution x resolution
  double position_noise_std = 0.01;
  double distractor_amplitude = 0.1;  // uniform camera noise standing in for scene clutter
  double blob_sigma_px = 1.6;
  bool include_tactile = false;       // 4 wall-contact flags as an extra modality
  diff::Index episode_len = 100;
  double step_size = 0.05;
  double goal_radius = 0.05;
  double wall_contact_distance = 0.02;

  void validate() const;
  std::string to_json_string() const;
  static ToyWorldConfig from_json_string(const std::string& text);
  std::uint64_t fingerprint() const;
};

struct WorldState {
  double x = 0.5, y = 0.5;
  diff::Index t = 0;
  double pos_noise[2] = {0.0, 0.0};    // raw standard normals, scaled at render
  std::uint64_t render_seed = 0;       // distractor stream for this step
};

struct StepResult {
  ObsBundle observation;
  double reward = 0.0;
  bool done = false;
  double goal_distance = 0.0;
};

ObsBundle render_modalities(const WorldState& state, const ToyWorldConfig& config);

class ToyWorld {
 public:
  explicit ToyWorld(ToyWorldConfig config);

  const ToyWorldConfig& config() const { return cfg_; }
  std::vector<mssm::ModalitySpec> modality_specs() const;
  diff::Index action_dim() const { return 2; }

  /// Uniform start position; deterministic given seed. goal_distance reports
  /// the start's distance to the goal.
  StepResult reset(std::uint64_t seed);
  /// Clips the action to [-1, 1]^2, moves by step_size * action (clipped to
  /// the arena), rewards -distance plus a +1 bonus inside goal_radius, and
  /// finishes after episode_len steps.
  StepResult step(const std::vector<double>& action);

  const WorldState& state() const { return state_; }
  double state_reward() const;  // reward evaluated at the current position

 private:
  void draw_state_noise();
  ToyWorldConfig cfg_;
  WorldState state_;
  diff::Rng rng_;
};

/// Action source for collection: sees the full (unmasked) observation bundle.
using EnvPolicy = std::function<std::vector<double>(const ObsBundle& obs, diff::Index t)>;

EnvPolicy uniform_random_policy(std::uint64_t seed);

/// Runs one episode, applies the segment-drop masks afterwards, and stores
/// observations unmasked with the availability flags alongside.
Episode collect_episode(ToyWorld& env, const EnvPolicy& policy, const MissingnessModel& missingness,
                        std::uint64_t env_seed, const std::string& policy_tag = "random");

}  // namespace mummi::envs
