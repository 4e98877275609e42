#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mummi/diff/tensor.hpp"

namespace mummi::mssm {

struct ModalitySpec {
  std::string name;
  diff::Shape obs_shape;               // per-timestep shape; flattened for the MLP encoder
  std::vector<diff::Index> encoder_hidden = {64, 64};

  diff::Index flat_dim() const { return diff::shape_numel(obs_shape); }
};

/// Latent and head dimensions. The projector output dimension is tied to
/// f_dim: expert means and projected latents live in the same space.
struct MssmConfig {
  diff::Index h_dim = 64;
  diff::Index c_dim = 16;
  diff::Index f_dim = 32;
  std::vector<diff::Index> hidden = {64, 64};
  diff::Index action_dim = 2;
  double std_min = 1e-3;
  bool use_prior_expert = false;
  std::string activation = "elu";
  std::vector<ModalitySpec> modalities;

  diff::Index embed_dim() const { return f_dim; }
  std::size_t modality_index(const std::string& name) const;  // throws if unknown
  void validate() const;

  /// Canonical (key-sorted) JSON; identical configs serialize identically.
  std::string to_json_string() const;
  static MssmConfig from_json_string(const std::string& text);
  std::uint64_t fingerprint() const;  // FNV-1a over the canonical JSON
};

std::uint64_t fnv1a(const std::string& text);

}  // namespace mummi::mssm
