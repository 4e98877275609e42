#pragma once

#include <deque>

#include "mummi/envs/episode.hpp"
#include "mummi/mssm/model.hpp"

namespace mummi::agent {

using diff::Index;

/// Bounded FIFO episode store.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(envs::Episode episode);
  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_added() const { return total_added_; }
  const envs::Episode& episode(std::size_t i) const { return episodes_.at(i); }

  /// B sub-sequences of length T: uniform choice over episodes long enough,
  /// then a uniform valid start offset. Throws when no stored episode has
  /// length >= T.
  mssm::Batch sample_batch(const mssm::MssmConfig& cfg, Index batch_size, Index seq_len,
                           diff::Rng& rng) const;

 private:
  std::deque<envs::Episode> episodes_;
  std::size_t capacity_;
  std::size_t total_added_ = 0;
};

}  // namespace mummi::agent
