#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cwsoc/errors.hpp"

namespace cwsoc::stats {

/// Integrated autocorrelation time 1 + 2 sum_k rho(k) with Sokal's
/// self-consistent window (stop at the first M >= window * tau(M)).
inline double integrated_autocorrelation_time(std::span<const double> xs, double window = 5.0) {
  const std::size_t n = xs.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - mean) * (x - mean);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;
  double tau = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double ck = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) ck += (xs[i] - mean) * (xs[i + k] - mean);
    ck /= static_cast<double>(n);
    tau += 2.0 * ck / c0;
    if (static_cast<double>(k) >= window * tau) break;
  }
  return std::max(tau, 1.0);
}

/// (sum w)^2 / sum w^2.
inline double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

struct WeightedMoments {
  double mean = 0.0;
  double variance = 0.0;
  /// Delta-method standard error of the self-normalised mean.
  double std_error = 0.0;
  double total_weight = 0.0;
};

inline WeightedMoments weighted_moments(std::span<const double> xs, std::span<const double> w) {
  if (xs.size() != w.size()) throw validation_error("weighted_moments: size mismatch");
  WeightedMoments m;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    m.total_weight += w[i];
    m.mean += w[i] * xs[i];
  }
  if (!(m.total_weight > 0.0)) throw validation_error("all weights are zero");
  m.mean /= m.total_weight;
  double se2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - m.mean;
    const double wn = w[i] / m.total_weight;
    m.variance += wn * d * d;
    se2 += wn * wn * d * d;
  }
  m.std_error = std::sqrt(se2);
  return m;
}

}  // namespace cwsoc::stats
