#pragma once

// Shared setup for the acceptance criteria: one blessed environment and model
// configuration, plus training wrappers that return everything the criteria
// measure. Training budgets are fixed here so every criterion runs the same
// protocol.

#include <string>

#include "mummi/agent/train_loop.hpp"
#include "mummi/cli/analysis.hpp"

namespace acceptance {

using namespace mummi;

envs::ToyWorldConfig toy2d_env();
mssm::MssmConfig toy2d_model(const envs::ToyWorldConfig& env);

struct TrainedRun {
  agent::TrainResult result;
  std::string run_dir;
  std::string checkpoint;
  double minutes = 0.0;
};

/// 200 collected episodes x 100 steps = 20k environment steps, masks at the
/// 37.5% protocol rate. `representation_only` collects with the random policy
/// and skips actor-critic updates.
TrainedRun train_toy2d(const std::string& variant, std::uint64_t seed, const std::string& tag,
                       bool representation_only);

/// Probe utilities measured on freshly collected states from a trained model.
struct RepresentationReport {
  double probe_r2_position = 0.0;
  double probe_r2_camera = 0.0;
  double cross_modal_distance = 0.0;  // E || d_pos(x) - d_cam(x) ||
  double calibration_ratio = 0.0;     // mean std(camera) / mean std(position)
  double probe_r2_fused_position_dropped = 0.0;
};
RepresentationReport representation_report(const mssm::MssmModel& model,
                                           const envs::ToyWorldConfig& env, std::uint64_t seed);

void criterion_line(const std::string& id, bool pass, const std::string& detail);

}  // namespace acceptance
