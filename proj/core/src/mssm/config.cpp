#include "mummi/mssm/config.hpp"

#include <json.hpp>

namespace mummi::mssm {

using nlohmann::json;

std::size_t MssmConfig::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i)
    if (modalities[i].name == name) return i;
  throw diff::DiffError("unknown modality: " + name);
}

void MssmConfig::validate() const {
  if (h_dim <= 0 || c_dim <= 0 || f_dim <= 0 || action_dim <= 0)
    throw diff::DiffError("MssmConfig: all dimensions must be positive");
  if (modalities.empty()) throw diff::DiffError("MssmConfig: at least one modality required");
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    const auto& m = modalities[i];
    if (m.name.empty()) throw diff::DiffError("MssmConfig: modality name empty");
    if (m.obs_shape.empty() || diff::shape_numel(m.obs_shape) <= 0)
      throw diff::DiffError("MssmConfig: modality " + m.name + " has empty observation shape");
    for (std::size_t j = i + 1; j < modalities.size(); ++j)
      if (modalities[j].name == m.name)
        throw diff::DiffError("MssmConfig: duplicate modality name " + m.name);
  }
  if (activation != "elu" && activation != "relu" && activation != "tanh")
    throw diff::DiffError("MssmConfig: unknown activation " + activation);
}

std::string MssmConfig::to_json_string() const {
  json j;
  j["h_dim"] = h_dim;
  j["c_dim"] = c_dim;
  j["f_dim"] = f_dim;
  j["hidden"] = hidden;
  j["action_dim"] = action_dim;
  j["std_min"] = std_min;
  j["use_prior_expert"] = use_prior_expert;
  j["activation"] = activation;
  json mods = json::array();
  for (const auto& m : modalities) {
    json jm;
    jm["name"] = m.name;
    jm["obs_shape"] = m.obs_shape;
    jm["encoder_hidden"] = m.encoder_hidden;
    mods.push_back(jm);
  }
  j["modalities"] = mods;
  return j.dump();
}

MssmConfig MssmConfig::from_json_string(const std::string& text) {
  const json j = json::parse(text);
  MssmConfig c;
  c.h_dim = j.at("h_dim").get<diff::Index>();
  c.c_dim = j.at("c_dim").get<diff::Index>();
  c.f_dim = j.at("f_dim").get<diff::Index>();
  c.hidden = j.at("hidden").get<std::vector<diff::Index>>();
  c.action_dim = j.at("action_dim").get<diff::Index>();
  c.std_min = j.at("std_min").get<double>();
  c.use_prior_expert = j.at("use_prior_expert").get<bool>();
  c.activation = j.at("activation").get<std::string>();
  for (const auto& jm : j.at("modalities")) {
    ModalitySpec m;
    m.name = jm.at("name").get<std::string>();
    m.obs_shape = jm.at("obs_shape").get<diff::Shape>();
    m.encoder_hidden = jm.at("encoder_hidden").get<std::vector<diff::Index>>();
    c.modalities.push_back(std::move(m));
  }
  c.validate();
  return c;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t MssmConfig::fingerprint() const { return fnv1a(to_json_string()); }

}  // namespace mummi::mssm
