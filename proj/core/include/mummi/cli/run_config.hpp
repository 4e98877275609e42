#pragma once

#include <optional>

#include "mummi/agent/train_loop.hpp"

namespace mummi::cli {

/// Full run description: environment, model dims, and training schedule.
/// Parsing is strict (unknown keys anywhere are rejected, listing the
/// offenders); every field has a default; the finalized effective document is
/// written verbatim into the run directory.
struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  std::string env_name = "toy2d";  // toy2d | toy2d-dualcam | toy2d-axes
  envs::ToyWorldConfig env;
  mssm::MssmConfig model;
  agent::TrainConfig train;

  static RunConfig defaults();
  static RunConfig from_json_text(const std::string& text);
  std::string to_json_text() const;

  /// Derives the modality selector from env_name, fills model.modalities from
  /// the environment, and propagates the run seed into the train config.
  void finalize();
};

struct ConfigError : diff::DiffError {
  using DiffError::DiffError;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<diff::Index> steps;
  std::optional<double> missing_rate;
  std::optional<std::string> variant;
  std::optional<std::string> env_name;
  std::optional<std::string> out_dir;
  std::optional<std::string> offline_dir;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

envs::ToyWorldConfig env_config_for(const std::string& env_name, envs::ToyWorldConfig base);

}  // namespace mummi::cli
