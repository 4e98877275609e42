#pragma once

// Independent oracles shared by the unit and acceptance suites. Everything in
// here recomputes expected values from first principles (quadrature, Monte
// Carlo, brute-force enumeration) without touching the implementation paths
// under test.

#include <cmath>
#include <vector>

namespace oracles {

struct Gauss1d {
  double mean;
  double std;
};

inline double gauss_pdf(double x, const Gauss1d& g) {
  const double z = (x - g.mean) / g.std;
  return std::exp(-0.5 * z * z) / (g.std * std::sqrt(2.0 * M_PI));
}

/// Total-variation distance between the grid-normalized pointwise product of
/// expert densities and a candidate density, integrated by trapezoid.
inline double product_grid_tv(const std::vector<Gauss1d>& experts, const Gauss1d& candidate,
                              int points = 4001) {
  double lo = experts[0].mean, hi = experts[0].mean, smax = 0.0;
  for (const auto& e : experts) {
    lo = std::min(lo, e.mean);
    hi = std::max(hi, e.mean);
    smax = std::max(smax, e.std);
  }
  lo -= 10.0 * smax;
  hi += 10.0 * smax;
  const double h = (hi - lo) / static_cast<double>(points - 1);

  std::vector<double> log_prod(points);
  double max_lp = -1e300;
  for (int i = 0; i < points; ++i) {
    const double x = lo + h * i;
    double lp = 0.0;
    for (const auto& e : experts) {
      const double z = (x - e.mean) / e.std;
      lp += -0.5 * z * z - std::log(e.std) - 0.5 * std::log(2.0 * M_PI);
    }
    log_prod[i] = lp;
    max_lp = std::max(max_lp, lp);
  }
  std::vector<double> w(points);
  double z_norm = 0.0;
  for (int i = 0; i < points; ++i) {
    w[i] = std::exp(log_prod[i] - max_lp);
    const double trap = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    z_norm += trap * w[i] * h;
  }
  double tv = 0.0;
  for (int i = 0; i < points; ++i) {
    const double q = w[i] / z_norm;
    const double p = gauss_pdf(lo + h * i, candidate);
    const double trap = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    tv += trap * std::abs(p - q) * h;
  }
  return 0.5 * tv;
}

/// Monte Carlo KL(q || p) for diagonal Gaussians with a standard-error
/// estimate, using externally supplied standard-normal draws.
struct McEstimate {
  double value;
  double std_error;
};

inline McEstimate mc_kl_diag(const std::vector<double>& q_mean, const std::vector<double>& q_std,
                             const std::vector<double>& p_mean, const std::vector<double>& p_std,
                             const std::vector<double>& normals, std::size_t samples) {
  const std::size_t d = q_mean.size();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double term = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double eps = normals[s * d + j];
      const double x = q_mean[j] + q_std[j] * eps;
      const double zq = (x - q_mean[j]) / q_std[j];
      const double zp = (x - p_mean[j]) / p_std[j];
      term += (-0.5 * zq * zq - std::log(q_std[j])) - (-0.5 * zp * zp - std::log(p_std[j]));
    }
    sum += term;
    sum_sq += term * term;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

/// Brute-force lambda-return: explicit k-step value estimates mixed with the
/// (1 - lambda) lambda^{k-1} weighting, the tail collapsing onto the full
/// bootstrapped sum.
inline std::vector<double> brute_force_lambda_returns(const std::vector<double>& rewards,
                                                      const std::vector<double>& values,
                                                      double gamma, double lambda) {
  const std::size_t h = rewards.size();
  std::vector<double> out(h);
  for (std::size_t t = 0; t < h; ++t) {
    const std::size_t k_max = h - t;
    auto v_n = [&](std::size_t k) {  // k-step estimate from t
      double acc = 0.0;
      double g = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        acc += g * rewards[t + j];
        g *= gamma;
      }
      return acc + g * values[t + k];
    };
    double mix = 0.0;
    double w = 1.0;  // lambda^{k-1}
    for (std::size_t k = 1; k < k_max; ++k) {
      mix += (1.0 - lambda) * w * v_n(k);
      w *= lambda;
    }
    mix += w * v_n(k_max);
    out[t] = mix;
  }
  return out;
}

}  // namespace oracles
