#include "mummi/envs/missingness.hpp"

#include <cmath>

namespace mummi::envs {

std::vector<std::vector<bool>> generate_masks(double target_rate, diff::Index t_len,
                                              diff::Index m_count, diff::Rng& rng) {
  if (t_len < 1) throw diff::DiffError("generate_masks: T must be >= 1");
  if (target_rate < 0.0 || target_rate > 1.0)
    throw diff::DomainError("generate_masks", "rate " + std::to_string(target_rate) + " outside [0, 1]");
  const auto target = static_cast<diff::Index>(std::llround(target_rate * static_cast<double>(t_len)));

  std::vector<std::vector<bool>> present(static_cast<std::size_t>(m_count),
                                         std::vector<bool>(static_cast<std::size_t>(t_len), true));
  for (auto& row : present) {
    diff::Index dropped = 0;
    while (dropped < target) {
      const diff::Index start = rng.uniform_index(t_len);
      const diff::Index len = 1 + rng.uniform_index(t_len);
      for (diff::Index t = start; t < std::min(start + len, t_len) && dropped < target; ++t) {
        if (row[static_cast<std::size_t>(t)]) {
          row[static_cast<std::size_t>(t)] = false;  // trim the segment once the budget is hit
          ++dropped;
        }
      }
    }
  }
  return present;
}

std::vector<std::vector<bool>> generate_masks(const MissingnessModel& model, diff::Index t_len,
                                              diff::Index m_count) {
  diff::Rng rng(model.seed);
  return generate_masks(model.target_rate, t_len, m_count, rng);
}

}  // namespace mummi::envs
