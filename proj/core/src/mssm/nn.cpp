#include "mummi/mssm/nn.hpp"

#include <cmath>

namespace mummi::mssm {

Tensor ParamRegistry::add(const std::string& name, Tensor t) {
  for (const auto& [n, _] : entries_) {
    if (n == name) throw diff::DiffError("duplicate parameter name: " + name);
  }
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

std::vector<Tensor> ParamRegistry::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [_, t] : entries_) out.push_back(t);
  return out;
}

Index ParamRegistry::total_size() const {
  Index n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void ParamRegistry::zero_grad_all() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

Activation activation_from_string(const std::string& s) {
  if (s == "elu") return Activation::kElu;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw diff::DiffError("unknown activation: " + s);
}

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::kElu: return "elu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "elu";
}

Tensor apply_activation(Activation a, const Tensor& x) {
  switch (a) {
    case Activation::kElu: return diff::elu(x);
    case Activation::kRelu: return diff::relu(x);
    case Activation::kTanh: return diff::tanh(x);
  }
  return diff::elu(x);
}

namespace {
Tensor xavier_uniform(Index in, Index out, diff::Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  return Tensor::from_values({in, out},
                             rng.uniform_vector(static_cast<std::size_t>(in * out), -limit, limit));
}
}  // namespace

Linear::Linear(ParamRegistry& reg, const std::string& prefix, Index in, Index out, diff::Rng& rng) {
  w_ = reg.add(prefix + ".w", xavier_uniform(in, out, rng));
  b_ = reg.add(prefix + ".b", Tensor::zeros({out}));
}

Tensor Linear::operator()(const Tensor& x) const { return diff::matmul(x, w_) + b_; }

Mlp::Mlp(ParamRegistry& reg, const std::string& prefix, const std::vector<Index>& widths,
         Activation act, diff::Rng& rng)
    : act_(act) {
  if (widths.size() < 2) throw diff::DiffError("Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(reg, prefix + ".l" + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = apply_activation(act_, h);
  }
  return h;
}

GaussianHead::GaussianHead(ParamRegistry& reg, const std::string& prefix, Index in,
                           const std::vector<Index>& hidden, Index out, Activation act,
                           double std_min, diff::Rng& rng)
    : act_(act), std_min_(std_min) {
  Index cur = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    trunk_.emplace_back(reg, prefix + ".trunk.l" + std::to_string(i), cur, hidden[i], rng);
    cur = hidden[i];
  }
  mean_head_ = Linear(reg, prefix + ".mean", cur, out, rng);
  std_head_ = Linear(reg, prefix + ".std", cur, out, rng);
}

DiagGaussian GaussianHead::operator()(const Tensor& x) const {
  Tensor h = x;
  for (const auto& l : trunk_) h = apply_activation(act_, l(h));
  return DiagGaussian(mean_head_(h), diff::softplus(std_head_(h)) + std_min_);
}

GruCell::GruCell(ParamRegistry& reg, const std::string& prefix, Index input, Index hidden,
                 diff::Rng& rng)
    : hidden_(hidden) {
  w_x_ = reg.add(prefix + ".w_x", xavier_uniform(input, 3 * hidden, rng));
  w_h_ = reg.add(prefix + ".w_h", xavier_uniform(hidden, 2 * hidden, rng));
  w_hc_ = reg.add(prefix + ".w_hc", xavier_uniform(hidden, hidden, rng));
  // keep-gate bias starts positive so the state persists before training
  std::vector<double> bias(static_cast<std::size_t>(3 * hidden), 0.0);
  for (Index i = hidden; i < 2 * hidden; ++i) bias[static_cast<std::size_t>(i)] = 1.0;
  b_ = reg.add(prefix + ".b", Tensor::from_values({3 * hidden}, std::move(bias)));
}

Tensor GruCell::operator()(const Tensor& x, const Tensor& h) const {
  const Tensor xg = diff::matmul(x, w_x_) + b_;
  const Tensor hg = diff::matmul(h, w_h_);
  const Tensor r = diff::sigmoid(diff::slice(xg, 1, 0, hidden_) + diff::slice(hg, 1, 0, hidden_));
  const Tensor u =
      diff::sigmoid(diff::slice(xg, 1, hidden_, hidden_) + diff::slice(hg, 1, hidden_, hidden_));
  const Tensor c = diff::tanh(diff::slice(xg, 1, 2 * hidden_, hidden_) + diff::matmul(r * h, w_hc_));
  return u * h + (1.0 - u) * c;
}

}  // namespace mummi::mssm
