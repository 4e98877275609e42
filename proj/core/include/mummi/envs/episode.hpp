#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mummi/diff/tensor.hpp"

namespace mummi::envs {

/// Per-timestep multi-modal observations, actions, rewards, and availability
/// masks. Masked observations stay in storage; consumers honor the flags.
struct Episode {
  diff::Index length = 0;      // T
  diff::Index action_dim = 0;  // A

  std::vector<std::string> modality_names;                 // storage order
  std::map<std::string, diff::Shape> obs_shapes;           // per-timestep shape
  std::map<std::string, std::vector<double>> observations; // [T x flat_dim], row-major
  std::map<std::string, std::vector<std::uint8_t>> masks;  // [T], 1 = present

  std::vector<double> actions;  // [T x A]
  std::vector<double> rewards;  // [T]

  std::uint64_t seed = 0;
  std::uint64_t env_fingerprint = 0;
  std::string policy_tag;  // how actions were produced, e.g. "random"

  double total_reward() const;
  void validate() const;
};

/// Single-file binary archive; doubles round-trip bit-exactly.
void save_episode(const std::string& path, const Episode& episode);
Episode load_episode(const std::string& path);

}  // namespace mummi::envs
