#pragma once

#include <map>
#include <string>
#include <vector>

#include "mummi/mssm/nn.hpp"

namespace mummi::mssm {

/// Flat archive of (name, shape, float64 payload) entries grouped in named
/// sections (model / policy / value / optimizer state), plus a config
/// fingerprint and free-form string metadata. Payloads round-trip bit-exactly.
struct Checkpoint {
  std::string config_json;
  std::uint64_t config_fingerprint = 0;
  std::map<std::string, std::string> meta;

  struct Entry {
    std::string name;
    diff::Shape shape;
    std::vector<double> values;
  };
  std::map<std::string, std::vector<Entry>> sections;

  void add_section(const std::string& section, const ParamRegistry& reg);
  /// Copies a section's payloads into the registry; every parameter must be
  /// present with a matching shape, otherwise throws with the offending name.
  void apply_section(const std::string& section, ParamRegistry& reg) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mummi::mssm
