#include "mummi/mssm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace mummi::mssm {

using nlohmann::json;

namespace {
constexpr char kMagic[9] = "MSSMCKP1";

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }
void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}
void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw diff::DiffError("checkpoint truncated");
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  read_bytes(is, &v, 4);
  return v;
}
std::string read_string(std::istream& is) {
  const auto n = read_u32(is);
  std::string s(n, '\0');
  read_bytes(is, s.data(), n);
  return s;
}
}  // namespace

void Checkpoint::add_section(const std::string& section, const ParamRegistry& reg) {
  auto& entries = sections[section];
  for (const auto& [name, t] : reg.named()) {
    Entry e;
    e.name = name;
    e.shape = t.shape();
    e.values.assign(t.values().begin(), t.values().end());
    entries.push_back(std::move(e));
  }
}

void Checkpoint::apply_section(const std::string& section, ParamRegistry& reg) const {
  const auto it = sections.find(section);
  if (it == sections.end()) throw diff::DiffError("checkpoint has no section '" + section + "'");
  std::map<std::string, const Entry*> by_name;
  for (const auto& e : it->second) by_name[e.name] = &e;
  for (auto& [name, t] : reg.named()) {
    const auto found = by_name.find(name);
    if (found == by_name.end())
      throw diff::DiffError("checkpoint section '" + section + "' missing parameter '" + name + "'");
    const Entry& e = *found->second;
    if (e.shape != t.shape())
      throw diff::ShapeError("checkpoint[" + name + "]", e.shape, t.shape());
    Tensor mutable_t = t;
    std::copy(e.values.begin(), e.values.end(), mutable_t.mutable_values().begin());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json header;
  header["schema"] = 1;
  header["config"] = ckpt.config_json;
  header["fingerprint"] = ckpt.config_fingerprint;
  header["meta"] = ckpt.meta;
  json section_names = json::array();
  for (const auto& [name, _] : ckpt.sections) section_names.push_back(name);
  header["sections"] = section_names;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw diff::DiffError("cannot open " + path + " for writing");
  write_bytes(os, kMagic, 8);
  write_string(os, header.dump());
  for (const auto& [name, entries] : ckpt.sections) {
    write_string(os, name);
    write_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      write_string(os, e.name);
      write_u32(os, static_cast<std::uint32_t>(e.shape.size()));
      for (const auto d : e.shape) {
        const std::int64_t v = d;
        write_bytes(os, &v, 8);
      }
      write_u32(os, static_cast<std::uint32_t>(e.values.size()));
      write_bytes(os, e.values.data(), e.values.size() * sizeof(double));
    }
  }
  if (!os) throw diff::DiffError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw diff::DiffError("cannot open " + path);
  char magic[8];
  read_bytes(is, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw diff::DiffError(path + " is not a checkpoint");
  const json header = json::parse(read_string(is));

  Checkpoint ckpt;
  ckpt.config_json = header.at("config").get<std::string>();
  ckpt.config_fingerprint = header.at("fingerprint").get<std::uint64_t>();
  ckpt.meta = header.at("meta").get<std::map<std::string, std::string>>();
  const auto section_count = header.at("sections").size();
  for (std::size_t s = 0; s < section_count; ++s) {
    const std::string name = read_string(is);
    const auto count = read_u32(is);
    auto& entries = ckpt.sections[name];
    for (std::uint32_t i = 0; i < count; ++i) {
      Checkpoint::Entry e;
      e.name = read_string(is);
      const auto rank = read_u32(is);
      e.shape.resize(rank);
      for (auto& d : e.shape) {
        std::int64_t v = 0;
        read_bytes(is, &v, 8);
        d = v;
      }
      const auto n = read_u32(is);
      e.values.resize(n);
      read_bytes(is, e.values.data(), n * sizeof(double));
      entries.push_back(std::move(e));
    }
  }
  return ckpt;
}

}  // namespace mummi::mssm
