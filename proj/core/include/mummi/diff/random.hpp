#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mummi/diff/tensor.hpp"

namespace mummi::diff {

/// Deterministic random source. Normal variates use an explicit Box-Muller
/// transform over mt19937_64 output, so streams are reproducible across
/// platforms (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal
  std::uint64_t next_u64();
  Index uniform_index(Index n);  // {0, ..., n-1}

  std::vector<double> normal_vector(std::size_t n);
  std::vector<double> uniform_vector(std::size_t n, double lo, double hi);
  Tensor normal_tensor(Shape shape);

  /// Exact engine-state round-trip for training resume.
  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace mummi::diff
