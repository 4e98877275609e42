#include "mummi/diff/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mummi::diff {

double Rng::uniform() {
  // 53-bit mantissa fill; value in [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(theta);
  have_cached_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::next_u64() { return engine_(); }

Index Rng::uniform_index(Index n) {
  // modulo-rejection to keep the draw unbiased
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<Index>(v % un);
}

std::vector<double> Rng::normal_vector(std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = normal();
  return out;
}

std::vector<double> Rng::uniform_vector(std::size_t n, double lo, double hi) {
  std::vector<double> out(n);
  for (auto& v : out) v = uniform(lo, hi);
  return out;
}

Tensor Rng::normal_tensor(Shape shape) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return Tensor::from_values(std::move(shape), normal_vector(n));
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  os << ' ' << (have_cached_ ? 1 : 0);
  if (have_cached_) {
    os << ' ';
    os.precision(17);
    os << std::hexfloat << cached_;
  }
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  int cached_flag = 0;
  is >> cached_flag;
  have_cached_ = cached_flag != 0;
  if (have_cached_) is >> std::hexfloat >> cached_;
}

}  // namespace mummi::diff
