#include "mummi/agent/replay_buffer.hpp"

namespace mummi::agent {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw diff::DiffError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::add(envs::Episode episode) {
  episode.validate();
  episodes_.push_back(std::move(episode));
  ++total_added_;
  while (episodes_.size() > capacity_) episodes_.pop_front();
}

mssm::Batch ReplayBuffer::sample_batch(const mssm::MssmConfig& cfg, Index batch_size, Index seq_len,
                                       diff::Rng& rng) const {
  if (batch_size < 1 || seq_len < 1) throw diff::DiffError("sample_batch: batch and length must be >= 1");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < episodes_.size(); ++i)
    if (episodes_[i].length >= seq_len) eligible.push_back(i);
  if (eligible.empty())
    throw diff::DiffError("sample_batch: no stored episode of length >= " + std::to_string(seq_len) +
                          "; collect more data first");

  struct Slice {
    const envs::Episode* ep;
    Index offset;
  };
  std::vector<Slice> slices;
  slices.reserve(static_cast<std::size_t>(batch_size));
  for (Index b = 0; b < batch_size; ++b) {
    const auto& ep = episodes_[eligible[static_cast<std::size_t>(rng.uniform_index(
        static_cast<Index>(eligible.size())))]];
    const Index max_offset = ep.length - seq_len;
    const Index offset = max_offset == 0 ? 0 : rng.uniform_index(max_offset + 1);
    slices.push_back({&ep, offset});
  }

  mssm::Batch batch;
  batch.batch_size = batch_size;
  batch.seq_len = seq_len;
  const Index A = cfg.action_dim;

  for (const auto& spec : cfg.modalities) {
    const Index d = spec.flat_dim();
    bool any_has = false;
    for (const auto& s : slices) any_has = any_has || s.ep->observations.count(spec.name) > 0;

    std::optional<std::vector<diff::Tensor>> obs;
    if (any_has) obs.emplace();
    std::vector<diff::Tensor> masks;
    for (Index t = 0; t < seq_len; ++t) {
      std::vector<double> mrow(static_cast<std::size_t>(batch_size), 0.0);
      std::vector<double> orow;
      if (any_has) orow.assign(static_cast<std::size_t>(batch_size * d), 0.0);
      for (Index b = 0; b < batch_size; ++b) {
        const auto& s = slices[static_cast<std::size_t>(b)];
        const auto it = s.ep->observations.find(spec.name);
        if (it == s.ep->observations.end()) continue;
        const Index src = s.offset + t;
        mrow[static_cast<std::size_t>(b)] = s.ep->masks.at(spec.name)[static_cast<std::size_t>(src)] ? 1.0 : 0.0;
        std::copy_n(it->second.begin() + src * d, d, orow.begin() + b * d);
      }
      if (any_has) obs->push_back(diff::Tensor::from_values({batch_size, d}, std::move(orow)));
      masks.push_back(diff::Tensor::from_values({batch_size, 1}, std::move(mrow)));
    }
    batch.observations.push_back(std::move(obs));
    batch.masks.push_back(std::move(masks));
  }

  for (Index t = 0; t < seq_len; ++t) {
    std::vector<double> arow(static_cast<std::size_t>(batch_size * A));
    std::vector<double> rrow(static_cast<std::size_t>(batch_size));
    for (Index b = 0; b < batch_size; ++b) {
      const auto& s = slices[static_cast<std::size_t>(b)];
      const Index src = s.offset + t;
      std::copy_n(s.ep->actions.begin() + src * A, A, arow.begin() + b * A);
      rrow[static_cast<std::size_t>(b)] = s.ep->rewards[static_cast<std::size_t>(src)];
    }
    batch.actions.push_back(diff::Tensor::from_values({batch_size, A}, std::move(arow)));
    batch.rewards.push_back(diff::Tensor::from_values({batch_size, 1}, std::move(rrow)));
  }
  return batch;
}

}  // namespace mummi::agent
