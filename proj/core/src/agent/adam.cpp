#include "mummi/agent/adam.hpp"

#include <cmath>

namespace mummi::agent {

double global_grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    const auto* g = p.grad();
    if (!g) continue;
    for (double v : *g) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return norm;
  const double scale = max_norm / norm;
  for (auto& p : params) {
    const auto* g = p.grad();
    if (!g) continue;
    auto d = p.data_handle();
    for (auto& v : *d->grad) v *= scale;
  }
  return norm;
}

Adam::Adam(const mssm::ParamRegistry& registry, Options opts) : opts_(opts) {
  for (const auto& [name, t] : registry.named()) {
    names_.push_back(name);
    params_.push_back(t);
    m_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto* g = params_[i].grad();
    if (!g) continue;
    auto vals = params_[i].mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < vals.size(); ++j) {
      double gj = (*g)[j];
      if (opts_.weight_decay != 0.0) gj += opts_.weight_decay * vals[j];
      m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * gj;
      v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      vals[j] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::save_state(mssm::Checkpoint& ckpt, const std::string& section) const {
  auto& entries = ckpt.sections[section];
  for (std::size_t i = 0; i < params_.size(); ++i) {
    entries.push_back({names_[i] + ".m", params_[i].shape(), m_[i]});
    entries.push_back({names_[i] + ".v", params_[i].shape(), v_[i]});
  }
  entries.push_back({"step_count", {1}, {static_cast<double>(t_)}});
}

void Adam::load_state(const mssm::Checkpoint& ckpt, const std::string& section) {
  const auto it = ckpt.sections.find(section);
  if (it == ckpt.sections.end())
    throw diff::DiffError("checkpoint has no optimizer section '" + section + "'");
  std::map<std::string, const mssm::Checkpoint::Entry*> by_name;
  for (const auto& e : it->second) by_name[e.name] = &e;
  auto fetch = [&](const std::string& name) -> const mssm::Checkpoint::Entry& {
    const auto f = by_name.find(name);
    if (f == by_name.end())
      throw diff::DiffError("optimizer section '" + section + "' missing entry '" + name + "'");
    return *f->second;
  };
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& em = fetch(names_[i] + ".m");
    const auto& ev = fetch(names_[i] + ".v");
    if (static_cast<diff::Index>(em.values.size()) != params_[i].numel())
      throw diff::ShapeError("adam_state[" + names_[i] + "]", em.shape, params_[i].shape());
    m_[i] = em.values;
    v_[i] = ev.values;
  }
  t_ = static_cast<std::uint64_t>(fetch("step_count").values.at(0));
}

}  // namespace mummi::agent
