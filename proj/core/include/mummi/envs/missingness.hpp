#pragma once

#include <cstdint>
#include <vector>

#include "mummi/diff/random.hpp"

namespace mummi::envs {

/// Segment-drop simulator: per modality, segments with uniformly random start
/// and length are masked until the per-episode masked count hits
/// round(rate * T) exactly.
struct MissingnessModel {
  double target_rate = 0.0;  // fraction of steps masked (dropped)
  std::uint64_t seed = 0;
};

/// masks[m][t] is true when modality m is PRESENT at step t. Deterministic
/// given the model's seed.
std::vector<std::vector<bool>> generate_masks(const MissingnessModel& model, diff::Index t_len,
                                              diff::Index m_count);

/// Same generator, driven by an external stream.
std::vector<std::vector<bool>> generate_masks(double target_rate, diff::Index t_len,
                                              diff::Index m_count, diff::Rng& rng);

}  // namespace mummi::envs
