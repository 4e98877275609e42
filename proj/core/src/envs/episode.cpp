#include "mummi/envs/episode.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace mummi::envs {

using nlohmann::json;

namespace {
constexpr char kMagic[9] = "MSSMEPI1";

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  write_u32(os, static_cast<std::uint32_t>(v.size()));
  write_bytes(os, v.data(), v.size() * sizeof(double));
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw diff::DiffError("episode archive truncated");
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  read_bytes(is, &v, 4);
  return v;
}

std::vector<double> read_doubles(std::istream& is) {
  const auto n = read_u32(is);
  std::vector<double> v(n);
  read_bytes(is, v.data(), n * sizeof(double));
  return v;
}
}  // namespace

double Episode::total_reward() const {
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

void Episode::validate() const {
  if (length < 1) throw diff::DiffError("Episode: length must be >= 1");
  if (static_cast<diff::Index>(rewards.size()) != length)
    throw diff::DiffError("Episode: rewards length mismatch");
  if (static_cast<diff::Index>(actions.size()) != length * action_dim)
    throw diff::DiffError("Episode: actions length mismatch");
  for (const auto& name : modality_names) {
    const auto it = observations.find(name);
    if (it == observations.end()) throw diff::DiffError("Episode: missing observations for " + name);
    const auto d = diff::shape_numel(obs_shapes.at(name));
    if (static_cast<diff::Index>(it->second.size()) != length * d)
      throw diff::DiffError("Episode: observation length mismatch for " + name);
    const auto& m = masks.at(name);
    if (static_cast<diff::Index>(m.size()) != length)
      throw diff::DiffError("Episode: mask length mismatch for " + name);
    for (double v : it->second)
      if (!std::isfinite(v)) throw diff::DiffError("Episode: non-finite observation in " + name);
  }
}

void save_episode(const std::string& path, const Episode& e) {
  json header;
  header["schema"] = 1;
  header["length"] = e.length;
  header["action_dim"] = e.action_dim;
  header["seed"] = e.seed;
  header["env_fingerprint"] = e.env_fingerprint;
  header["policy_tag"] = e.policy_tag;
  header["modalities"] = json::array();
  for (const auto& name : e.modality_names) {
    json m;
    m["name"] = name;
    m["obs_shape"] = e.obs_shapes.at(name);
    header["modalities"].push_back(m);
  }
  const std::string htext = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw diff::DiffError("cannot open " + path + " for writing");
  write_bytes(os, kMagic, 8);
  write_u32(os, static_cast<std::uint32_t>(htext.size()));
  write_bytes(os, htext.data(), htext.size());
  write_doubles(os, e.actions);
  write_doubles(os, e.rewards);
  for (const auto& name : e.modality_names) {
    write_doubles(os, e.observations.at(name));
    const auto& m = e.masks.at(name);
    write_u32(os, static_cast<std::uint32_t>(m.size()));
    write_bytes(os, m.data(), m.size());
  }
  if (!os) throw diff::DiffError("write failed for " + path);
}

Episode load_episode(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw diff::DiffError("cannot open " + path);
  char magic[8];
  read_bytes(is, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw diff::DiffError(path + " is not an episode archive");
  const auto hlen = read_u32(is);
  std::string htext(hlen, '\0');
  read_bytes(is, htext.data(), hlen);
  const json header = json::parse(htext);

  Episode e;
  e.length = header.at("length").get<diff::Index>();
  e.action_dim = header.at("action_dim").get<diff::Index>();
  e.seed = header.at("seed").get<std::uint64_t>();
  e.env_fingerprint = header.at("env_fingerprint").get<std::uint64_t>();
  e.policy_tag = header.at("policy_tag").get<std::string>();
  for (const auto& m : header.at("modalities")) {
    const auto name = m.at("name").get<std::string>();
    e.modality_names.push_back(name);
    e.obs_shapes[name] = m.at("obs_shape").get<diff::Shape>();
  }
  e.actions = read_doubles(is);
  e.rewards = read_doubles(is);
  for (const auto& name : e.modality_names) {
    e.observations[name] = read_doubles(is);
    const auto n = read_u32(is);
    std::vector<std::uint8_t> mask(n);
    read_bytes(is, mask.data(), n);
    e.masks[name] = std::move(mask);
  }
  e.validate();
  return e;
}

}  // namespace mummi::envs
