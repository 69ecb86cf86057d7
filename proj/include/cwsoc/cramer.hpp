#pragma once

// Characteristic function of nu_rho = law(Z, Z^2) and estimation of the
// Cramer condition sup_{|(s,t)| >= alpha} |E e^{isZ + itZ^2}| < 1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cwsoc/measure.hpp"
#include "cwsoc/quadrature.hpp"

namespace cwsoc {

using cplx = std::complex<double>;

struct Lattice {
  double offset = 0.0;
  double spacing = 0.0;  ///< 0 when every value coincides
};

struct MixtureBound {
  double bound = 1.0;         ///< sqrt(a^2 eta + 1 - a^2)
  double eta = 1.0;           ///< padded sup of |FT f2| over the annulus
  double eta_estimate = 1.0;  ///< grid sup before padding
  double padding = 0.0;
  double quadrature_error = 0.0;
};

struct CramerReport {
  enum class Verdict { pass, fail, inconclusive };
  double alpha = 0.0;
  double radius = 0.0;
  double step = 0.0;
  double margin = 1e-3;
  double sup_estimate = 0.0;
  std::optional<double> sup_bound;
  double lipschitz_padding = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::optional<std::pair<double, double>> witness;
  std::optional<Lattice> lattice;
  std::optional<MixtureBound> mixture;
  std::string reason;
};

inline const char* to_string(CramerReport::Verdict v) {
  switch (v) {
    case CramerReport::Verdict::pass: return "pass";
    case CramerReport::Verdict::fail: return "fail";
    case CramerReport::Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

/// Evaluates M(i(s,t)) = int e^{isz + itz^2} d rho(z).
class CharEvaluator {
 public:
  explicit CharEvaluator(Measure1D base, double max_panel_phase = 1.5)
      : base_(std::move(base)), max_panel_phase_(max_panel_phase) {
    const auto s = moments(base_);
    sigma2_ = s.sigma2;
    abs_mean_ = s.abs_mean;
    symmetric_ = base_.symmetry_defect() <= 1e-10;
    if (const auto& f = base_.density()) {
      const double R = f->support_radius();
      ac_abs_mean_ = quad::adaptive([&](double z) { return std::abs(z) * f->pdf(z); }, -R, R).value;
      ac_second_ = quad::adaptive([&](double z) { return z * z * f->pdf(z); }, -R, R).value;
    }
  }

  const Measure1D& base() const noexcept { return base_; }
  bool symmetric() const noexcept { return symmetric_; }

  /// Lipschitz modulus of (s, t) -> M: int (|z| + z^2) d rho.
  double lipschitz() const noexcept { return abs_mean_ + sigma2_; }
  /// Lipschitz modulus of the squared density-part transform (= FT of f2).
  double lipschitz_f2() const noexcept { return 2.0 * (ac_abs_mean_ + ac_second_); }

  /// Fourier transform of the density component alone (normalised).
  cplx ac_char(double s, double t, double* err = nullptr) const {
    const Density& f = *base_.density();
    if (auto cf = f.closed_form_char(s, t)) {
      if (err) *err = 0.0;
      return *cf;
    }
    const double R = f.support_radius();
    const double rate = std::abs(s) + 2.0 * std::abs(t) * R;
    const int panels = std::max(8, static_cast<int>(std::ceil(2.0 * R * rate / max_panel_phase_)));
    auto fz = [&](double z) { return f.pdf(z) * std::exp(cplx(0.0, s * z + t * z * z)); };
    cplx acc{0.0, 0.0};
    cplx coarse{0.0, 0.0};
    auto integrate = [&](double lo, double hi, int pieces) {
      const double h = (hi - lo) / pieces;
      for (int k = 0; k < pieces; ++k) {
        const double a = lo + k * h;
        acc += quad::fixed<16>(fz, a, a + h);
        coarse += quad::fixed<10>(fz, a, a + h);
      }
    };
    if (f.kind() == Density::Kind::table) {
      // piecewise-linear: panels must not straddle a node
      const auto& z = f.table_nodes();
      for (std::size_t i = 1; i < z.size(); ++i) {
        const double w = z[i] - z[i - 1];
        integrate(z[i - 1], z[i], std::max(1, static_cast<int>(std::ceil(w * rate / max_panel_phase_))));
      }
    } else {
      integrate(-R, R, panels);
    }
    if (err) *err = std::abs(acc - coarse);
    return acc;
  }

  cplx operator()(double s, double t, double* err = nullptr) const {
    cplx acc{0.0, 0.0};
    for (const auto& at : base_.atoms()) {
      const double z = at.location;
      acc += at.mass * std::exp(cplx(0.0, s * z + t * z * z));
    }
    if (err) *err = 0.0;
    if (base_.density()) acc += base_.ac_mass() * ac_char(s, t, err);
    return acc;
  }

 private:
  Measure1D base_;
  double max_panel_phase_;
  double sigma2_ = 0.0;
  double abs_mean_ = 0.0;
  double ac_abs_mean_ = 0.0;
  double ac_second_ = 0.0;
  bool symmetric_ = false;
};

inline cplx char_fn(const CharEvaluator& e, double s, double t) { return e(s, t); }

namespace detail {

struct GridMax {
  double value = -1.0;
  double s = 0.0;
  double t = 0.0;
  double max_error = 0.0;
};

// Maximise |F(s,t)| over alpha <= |(s,t)| <= radius on a grid of spacing
// `step` plus the inner circle, then polish the best few cells with
// alternating golden-section searches. Uses |F(-s,-t)| = |F(s,t)| and, when
// `mirror` holds, |F(-s,t)| = |F(s,t)|.
template <class F>
GridMax annulus_max(F&& modulus, double alpha, double radius, double step, bool mirror) {
  struct Cand {
    double v, s, t;
  };
  std::vector<Cand> top;
  const std::size_t keep = 8;
  GridMax best;
  auto consider = [&](double s, double t) {
    double err = 0.0;
    const double v = modulus(s, t, &err);
    best.max_error = std::max(best.max_error, err);
    if (top.size() < keep || v > top.back().v) {
      for (auto& c : top) {
        if (std::abs(c.s - s) <= 2 * step && std::abs(c.t - t) <= 2 * step) {
          if (v > c.v) c = {v, s, t};
          std::sort(top.begin(), top.end(), [](const Cand& a, const Cand& b) { return a.v > b.v; });
          return;
        }
      }
      top.push_back({v, s, t});
      std::sort(top.begin(), top.end(), [](const Cand& a, const Cand& b) { return a.v > b.v; });
      if (top.size() > keep) top.pop_back();
    }
  };
  const int ns = static_cast<int>(std::ceil(radius / step));
  const int s_lo = mirror ? 0 : -ns;
  for (int i = s_lo; i <= ns; ++i) {
    const double s = i * step;
    for (int j = 0; j <= ns; ++j) {
      const double t = j * step;
      const double r = std::hypot(s, t);
      if (r < alpha || r > radius) continue;
      consider(s, t);
    }
  }
  const double arc = mirror ? 0.5 * std::numbers::pi : std::numbers::pi;
  const int nc = std::max(8, static_cast<int>(std::ceil(arc * alpha / (0.5 * step))));
  for (int k = 0; k <= nc; ++k) {
    const double th = arc * k / nc;
    consider(alpha * std::cos(th), alpha * std::sin(th));
  }

  auto project = [&](double& s, double& t) {
    const double r = std::hypot(s, t);
    if (r < alpha && r > 0) {
      s *= alpha / r;
      t *= alpha / r;
    } else if (r > radius) {
      s *= radius / r;
      t *= radius / r;
    }
  };
  auto golden = [&](auto&& f, double lo, double hi) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-11) {
      if (f1 < f2) {
        lo = x1; x1 = x2; f1 = f2; x2 = lo + g * (hi - lo); f2 = f(x2);
      } else {
        hi = x2; x2 = x1; f2 = f1; x1 = hi - g * (hi - lo); f1 = f(x1);
      }
    }
    return 0.5 * (lo + hi);
  };
  for (const auto& c : top) {
    double s = c.s, t = c.t;
    for (int round = 0; round < 6; ++round) {
      const double s0 = s, t0 = t;
      s = golden([&](double x) { double a = x, b = t; project(a, b); return modulus(a, b, nullptr); }, s0 - step, s0 + step);
      project(s, t);
      t = golden([&](double y) { double a = s, b = y; project(a, b); return modulus(a, b, nullptr); }, t0 - step, t0 + step);
      project(s, t);
    }
    const double v = modulus(s, t, nullptr);
    if (v > best.value) best = {v, s, t, best.max_error};
    if (c.v > best.value) best = {c.v, c.s, c.t, best.max_error};
  }
  return best;
}

// Best rational approximation p/q of r via continued fractions. Denominators
// are capped at 0.1/sqrt(tol): beyond that every real is within tol of some p/q.
inline std::optional<std::pair<long long, long long>> rational_approx(double r, double tol) {
  const long long qmax = std::max(1LL, static_cast<long long>(0.1 / std::sqrt(tol)));
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double x = r;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(x);
    if (std::abs(a) > 1e15) break;
    const long long ai = static_cast<long long>(a);
    const long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > qmax) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    if (std::abs(r - static_cast<double>(p1) / static_cast<double>(q1)) <= tol * std::max(1.0, std::abs(r)))
      return std::make_pair(p1, q1);
    const double frac = x - a;
    if (frac == 0.0) break;
    x = 1.0 / frac;
  }
  return std::nullopt;
}

}  // namespace detail

/// If <s0, (z, z^2)> takes values in a common a + bZ for every atom, returns
/// that lattice. Any density mass rules it out.
inline std::optional<Lattice> detect_arithmetic(const CharEvaluator& e, double s0, double t0, double tol = 1e-10) {
  if (s0 == 0.0 && t0 == 0.0) throw validation_error("detect_arithmetic: s0 must be nonzero");
  const auto& m = e.base();
  if (m.density()) return std::nullopt;
  std::vector<double> vals;
  for (const auto& at : m.atoms()) vals.push_back(s0 * at.location + t0 * at.location * at.location);
  const double v0 = vals.front();
  const double scale = std::max(1.0, std::abs(v0));
  double b = 0.0;
  for (double v : vals) {
    const double d = std::abs(v - v0);
    if (d <= tol * scale) continue;
    if (b == 0.0) {
      b = d;
      continue;
    }
    const auto pq = detail::rational_approx(d / b, tol);
    if (!pq) return std::nullopt;
    b /= static_cast<double>(pq->second);
  }
  Lattice lat;
  lat.spacing = b;
  if (b == 0.0) {
    lat.offset = v0;
    return lat;
  }
  double a = std::fmod(v0, b);
  if (a < 0) a += b;
  if (b - a <= tol * scale) a = 0.0;
  lat.offset = a;
  return lat;
}

inline double mixture_bound_from_eta(double a, double eta) { return std::sqrt(a * a * eta + 1.0 - a * a); }

/// Certified (modulo quadrature) bound sup |M| <= sqrt(a^2 eta + 1 - a^2),
/// with eta >= sup over the annulus of |FT f2| = |M_ac|^2. Not applicable
/// when the measure has no density component.
inline std::optional<MixtureBound> mixture_bound(const CharEvaluator& e, double alpha, double radius = 50.0,
                                                 double step = 0.05) {
  const auto& m = e.base();
  if (!m.density() || !(m.ac_mass() > 0.0)) return std::nullopt;
  auto modulus = [&](double s, double t, double* err) { return std::norm(e.ac_char(s, t, err)); };
  const auto best = detail::annulus_max(modulus, alpha, radius, step, e.symmetric());
  MixtureBound mb;
  mb.eta_estimate = best.value;
  mb.padding = e.lipschitz_f2() * step;
  mb.quadrature_error = 2.0 * best.max_error;
  mb.eta = std::min(1.0, best.value + mb.padding + mb.quadrature_error);
  mb.bound = mixture_bound_from_eta(m.ac_mass(), mb.eta);
  return mb;
}

inline CramerReport check_condition(const CharEvaluator& e, double alpha, double radius = 50.0, double step = 0.05) {
  if (!(alpha > 0.0) || !(radius > alpha) || !(step > 0.0))
    throw validation_error("check_condition: need 0 < alpha < radius and step > 0");
  CramerReport rep;
  rep.alpha = alpha;
  rep.radius = radius;
  rep.step = step;
  auto modulus = [&](double s, double t, double* err) { return std::abs(e(s, t, err)); };
  const auto best = detail::annulus_max(modulus, alpha, radius, step, e.symmetric());
  rep.sup_estimate = best.value;
  rep.lipschitz_padding = e.lipschitz() * step + best.max_error;

  if (best.value >= 1.0 - 1e-9) {
    rep.verdict = CramerReport::Verdict::fail;
    rep.witness = std::make_pair(best.s, best.t);
    rep.lattice = detect_arithmetic(e, best.s, best.t, 1e-7);
    rep.reason = "|M| reaches 1 at the witness: nu_rho is arithmetic in that direction";
    return rep;
  }
  if (auto mb = mixture_bound(e, alpha, radius, step)) {
    rep.mixture = mb;
    if (mb->bound < 1.0) {
      rep.sup_bound = mb->bound;
      rep.verdict = CramerReport::Verdict::pass;
      rep.reason = "absolutely continuous component: mixture bound < 1";
      return rep;
    }
    if (e.base().ac_mass() >= 1.0 && best.value + rep.lipschitz_padding < 1.0 - rep.margin) {
      rep.sup_bound = best.value + rep.lipschitz_padding;
      rep.verdict = CramerReport::Verdict::pass;
      rep.reason = "density: grid bound below 1 - margin, Riemann-Lebesgue beyond the radius";
      return rep;
    }
    rep.reason = "mixture bound not below 1 at this grid resolution";
    return rep;
  }
  rep.reason = "purely atomic and no lattice witness found within the radius; no tail control";
  return rep;
}

/// The Cramer condition for a law on the line (the d = 1 case): it holds
/// iff there is an absolutely continuous component; finitely many atoms
/// alone give an almost periodic transform with sup = 1.
inline bool cramer_condition_1d(const Measure1D& nu) { return nu.density().has_value() && nu.ac_mass() > 0.0; }

}  // namespace cwsoc
