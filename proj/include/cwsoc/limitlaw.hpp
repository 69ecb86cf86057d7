#pragma once

// The quartic limit law with density (4/3)^{1/4} Gamma(1/4)^{-1} e^{-s^4/12}
// and the verification pipeline (LLN, KS distance, moments).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <math.h>  // boost pchip calls isnan unqualified; this puts it in the global namespace
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cwsoc/cramer.hpp"
#include "cwsoc/errors.hpp"
#include "cwsoc/model.hpp"
#include "cwsoc/rng.hpp"
#include "cwsoc/stats.hpp"

namespace cwsoc {

namespace quartic {

inline double normaliser() {
  static const double c = std::pow(4.0 / 3.0, 0.25) / std::tgamma(0.25);
  return c;
}

inline double pdf(double s) { return normaliser() * std::exp(-s * s * s * s / 12.0); }

/// For s <= 0 the substitution t = s^4/12 gives cdf(s) = Q(1/4, s^4/12) / 2.
inline double cdf(double s) {
  const double tail = 0.5 * boost::math::gamma_q(0.25, s * s * s * s / 12.0);
  return s <= 0.0 ? tail : 1.0 - tail;
}

/// E S^k = 12^{k/4} Gamma((k+1)/4) / Gamma(1/4) for even k, 0 for odd k.
inline double moment(int k) {
  if (k < 0) throw validation_error("moment order must be >= 0");
  if (k % 2 == 1) return 0.0;
  return std::pow(12.0, k / 4.0) * std::tgamma((k + 1) / 4.0) / std::tgamma(0.25);
}

namespace detail {

// Monotone cubic interpolant of s against ln cdf(s) on [-6, 0]; the upper
// half follows by symmetry.
struct InverseTable {
  boost::math::interpolators::pchip<std::vector<double>> spline;
  double log_p_min;

  static InverseTable build() {
    constexpr int nodes = 5000;
    std::vector<double> lp(nodes), s(nodes);
    for (int i = 0; i < nodes; ++i) {
      s[i] = -6.0 + 6.0 * i / (nodes - 1);
      lp[i] = std::log(cdf(s[i]));
    }
    const double lo = lp.front();
    return {boost::math::interpolators::pchip<std::vector<double>>(std::move(lp), std::move(s)), lo};
  }
};

inline const InverseTable& inverse_table() {
  static const InverseTable t = InverseTable::build();
  return t;
}

}  // namespace detail

/// Inverse CDF: table lookup followed by two Newton steps on the exact cdf.
inline double inverse_cdf(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw validation_error("probability must lie in [0, 1]");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double q = upper ? 1.0 - p : p;
  const auto& t = detail::inverse_table();
  if (q <= 0.0) return upper ? 6.0 : -6.0;
  const double lq = std::log(q);
  double s = lq <= t.log_p_min ? -6.0 : t.spline(lq);
  for (int it = 0; it < 2 && lq > t.log_p_min; ++it) {
    const double d = pdf(s);
    if (d <= 0.0) break;
    s = std::min(0.0, s - (cdf(s) - q) / d);
  }
  return upper ? -s : s;
}

inline double sample(Rng& rng) { return inverse_cdf(rng.uniform()); }

inline std::vector<double> sample(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(count);
  for (auto& x : out) x = sample(rng);
  return out;
}

}  // namespace quartic

struct CdfPoint {
  double s;
  double empirical;  ///< right limit of the empirical CDF at s
  double limit;
};

/// sup |F_emp - F| over the sample points (left and right limits), with
/// normalised weights and ties merged.
template <class Cdf>
double ks_distance(std::vector<std::pair<double, double>> pts, Cdf&& cdf, std::vector<CdfPoint>* curve = nullptr) {
  if (pts.empty()) throw validation_error("ks_distance: empty batch");
  double total = 0.0;
  for (const auto& p : pts) {
    if (!(p.second >= 0.0)) throw validation_error("ks_distance: negative weight");
    total += p.second;
  }
  if (!(total > 0.0)) throw validation_error("ks_distance: all weights are zero");
  std::sort(pts.begin(), pts.end());
  double acc = 0.0, d = 0.0;
  for (std::size_t i = 0; i < pts.size();) {
    const double s = pts[i].first;
    const double F = cdf(s);
    const double left = acc / total;
    while (i < pts.size() && pts[i].first == s) acc += pts[i++].second;
    const double right = std::min(1.0, acc / total);
    d = std::max({d, std::abs(left - F), std::abs(right - F)});
    if (curve) curve->push_back({s, right, F});
  }
  return std::min(d, 1.0);
}

inline double ks_distance_quartic(std::vector<std::pair<double, double>> pts, std::vector<CdfPoint>* curve = nullptr) {
  return ks_distance(std::move(pts), [](double s) { return quartic::cdf(s); }, curve);
}

/// Kolmogorov 1% critical value, asymptotic form 1.628 / sqrt(N).
inline double kolmogorov_bound_1pct(double samples) { return 1.6276 / std::sqrt(samples); }

struct MomentRow {
  int order = 0;
  double empirical = 0.0;
  double limit = 0.0;
  double relative_error = 0.0;
};

struct VerificationReport {
  std::string test_id;
  int n = 0;
  std::string method;
  bool passed = false;
  double tolerance = 0.0;
  // fluctuations
  std::optional<double> ks_distance;
  std::vector<MomentRow> moments;
  double rescaling_factor = 0.0;
  // law of large numbers
  std::optional<double> mean_x, se_x, mean_y, se_y, target_y;
  std::vector<std::pair<int, double>> tail_ladder;  ///< (n, P(|(x, y) - (0, sigma^2)| > delta))
  std::optional<bool> tail_decreasing;
  // hypotheses and sample quality
  std::string cramer = "not checked";
  std::optional<double> effective_sample_size;
  std::vector<std::string> notes;
};

/// "satisfied" / "violated" / "inconclusive". A density component settles
/// it; purely atomic rho gets a coarse grid check.
inline std::string cramer_flag(const Measure1D& rho) {
  if (rho.density() && rho.ac_mass() > 0.0) return "satisfied";
  const CharEvaluator e(rho);
  const auto rep = check_condition(e, 0.5, 20.0, 0.05);
  switch (rep.verdict) {
    case CramerReport::Verdict::pass: return "satisfied";
    case CramerReport::Verdict::fail: return "violated";
    default: return "inconclusive";
  }
}

namespace detail {

// standard error of a weighted mean, inflated by sqrt(tau_int) for chains
inline stats::WeightedMoments batch_mean(const EmpiricalBatch& b, const std::vector<double>& xs) {
  std::vector<double> w;
  w.reserve(b.samples.size());
  for (const auto& s : b.samples) w.push_back(s.weight);
  auto m = stats::weighted_moments(xs, w);
  if (b.method == Method::enumeration) m.std_error = 0.0;
  if (b.method == Method::metropolis) {
    const unsigned chains = std::max(1u, b.diagnostics.chains);
    const std::size_t len = xs.size() / chains;
    double tau = 0.0;
    for (unsigned c = 0; c < chains; ++c)
      tau += stats::integrated_autocorrelation_time(std::span<const double>(xs.data() + c * len, len));
    m.std_error *= std::sqrt(tau / chains);
  }
  return m;
}

}  // namespace detail

/// Checks |E x| <= tol and |E y - sigma^2| <= tol for (x, y) = (S/n, T/n).
inline VerificationReport verify_lln(const TiltedModel& m, const EmpiricalBatch& b, double tol) {
  if (b.n != m.n()) throw validation_error("batch was produced for a different n");
  const double n = m.n();
  std::vector<double> xs, ys;
  for (const auto& s : b.samples) {
    xs.push_back(s.S / n);
    ys.push_back(s.T / n);
  }
  const auto mx = detail::batch_mean(b, xs);
  const auto my = detail::batch_mean(b, ys);
  VerificationReport r;
  r.test_id = "lln";
  r.n = m.n();
  r.method = to_string(b.method);
  r.tolerance = tol;
  r.mean_x = mx.mean;
  r.se_x = mx.std_error;
  r.mean_y = my.mean;
  r.se_y = my.std_error;
  r.target_y = moments(m.rho()).sigma2;
  r.passed = std::abs(mx.mean) <= tol && std::abs(my.mean - *r.target_y) <= tol;
  if (b.method != Method::enumeration) r.effective_sample_size = b.diagnostics.effective_sample_size;
  return r;
}

/// Exact P(|(S/n, T/n) - (0, sigma^2)| > delta) along an n-ladder (atomic rho).
inline VerificationReport verify_lln_ladder(const Measure1D& rho, const Interaction& g, const std::vector<int>& ladder,
                                            double delta, double tol) {
  VerificationReport r;
  r.test_id = "lln-ladder";
  r.method = "enumeration";
  r.tolerance = tol;
  const double s2 = moments(rho).sigma2;
  r.target_y = s2;
  for (int n : ladder) {
    const TiltedModel m(rho, g, n);
    const double p =
        exact_probability(m, [&](double x, double y) { return std::hypot(x, y - s2) > delta; });
    r.tail_ladder.emplace_back(n, p);
    r.n = n;
  }
  bool dec = true;
  for (std::size_t i = 1; i < r.tail_ladder.size(); ++i) dec = dec && r.tail_ladder[i].second < r.tail_ladder[i - 1].second;
  r.tail_decreasing = dec;
  r.passed = dec && !r.tail_ladder.empty() && r.tail_ladder.back().second <= tol;
  return r;
}

namespace detail {

inline VerificationReport fluctuation_report(const TiltedModel& m, std::vector<std::pair<double, double>> pts,
                                             Method method, double tol_ks, std::optional<std::string> cramer,
                                             std::vector<CdfPoint>* curve) {
  VerificationReport r;
  r.test_id = "fluctuations";
  r.n = m.n();
  r.method = to_string(method);
  r.tolerance = tol_ks;
  r.rescaling_factor = rescaling_factor(m);
  double tot = 0.0, m2 = 0.0, m4 = 0.0;
  for (const auto& [v, w] : pts) {
    tot += w;
    m2 += w * v * v;
    m4 += w * v * v * v * v;
  }
  if (!(tot > 0.0)) throw validation_error("batch has zero total weight");
  for (auto [k, e] : {std::pair{2, m2 / tot}, std::pair{4, m4 / tot}}) {
    const double lim = quartic::moment(k);
    r.moments.push_back({k, e, lim, (e - lim) / lim});
  }
  r.ks_distance = ks_distance_quartic(std::move(pts), curve);
  r.passed = *r.ks_distance <= tol_ks;
  r.cramer = cramer ? *cramer : cramer_flag(m.rho());
  if (r.cramer != "satisfied")
    r.notes.push_back("Cramer condition not established for rho (" + r.cramer +
                      "); the fluctuation theorem is not asserted to apply");
  if (m.rho().is_atomic()) r.notes.push_back("lattice rho: S takes values on a lattice, the CDF is a step function");
  return r;
}

}  // namespace detail

/// KS distance and moments of the rescaled statistic against the quartic law.
inline VerificationReport verify_fluctuations(const TiltedModel& m, const EmpiricalBatch& b, double tol_ks,
                                              std::optional<std::string> cramer = std::nullopt,
                                              std::vector<CdfPoint>* curve = nullptr) {
  auto r = detail::fluctuation_report(m, rescaled_statistic(m, b), b.method, tol_ks, std::move(cramer), curve);
  if (b.method != Method::enumeration) r.effective_sample_size = b.diagnostics.effective_sample_size;
  return r;
}

/// Same, from the exact law of S (streaming enumeration, no batch kept).
inline VerificationReport verify_fluctuations_exact(const TiltedModel& m, double tol_ks,
                                                    std::optional<std::string> cramer = std::nullopt,
                                                    std::vector<CdfPoint>* curve = nullptr) {
  const double f = rescaling_factor(m) / std::pow(static_cast<double>(m.n()), 0.75);
  std::vector<std::pair<double, double>> pts;
  for (const auto& [S, p] : exact_law_S(m)) pts.emplace_back(f * S, p);
  return detail::fluctuation_report(m, std::move(pts), Method::enumeration, tol_ks, std::move(cramer), curve);
}

}  // namespace cwsoc
