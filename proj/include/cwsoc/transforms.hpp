#pragma once

// Log-Laplace transforms of the lifted laws (Z) and (Z, Z^2) and their
// Cramer transforms computed by convex duality.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "cwsoc/errors.hpp"
#include "cwsoc/interaction.hpp"
#include "cwsoc/measure.hpp"

namespace cwsoc {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

template <int D>
struct LaplaceEval {
  double value = 0.0;
  Vec<D> gradient = Vec<D>::Zero();
  Mat<D> hessian = Mat<D>::Zero();
};

/// Log-Laplace of nu_rho, the law of (Z, Z^2): L(u, v) = ln E e^{uZ + vZ^2}.
class LogLaplace {
 public:
  static constexpr int dim = 2;

  explicit LogLaplace(Measure1D base) : base_(std::move(base)), summary_(moments(base_)) {}

  const Measure1D& base() const noexcept { return base_; }
  const MomentSummary& summary() const noexcept { return summary_; }

  /// D_L = R x (-inf, vbar) when a density is present, R^2 otherwise.
  bool in_domain(const Vec<2>& p) const noexcept { return p[1] < base_.laplace_v_limit(); }

  double value(const Vec<2>& p) const {
    if (!in_domain(p)) return kInf;
    return tilted_integrals(base_, p[0], p[1]).log_total;
  }
  double value(double u, double v) const { return value(Vec<2>(u, v)); }

  /// Value, gradient (tilted means of z, z^2) and Hessian (their covariance).
  LaplaceEval<2> evaluate(const Vec<2>& p) const {
    if (!in_domain(p)) throw domain_fault("log-Laplace derivatives requested outside the interior of D_L");
    const auto ti = tilted_integrals(base_, p[0], p[1]);
    const auto& m = ti.moments;
    LaplaceEval<2> e;
    e.value = ti.log_total;
    e.gradient << m[1], m[2];
    e.hessian << m[2] - m[1] * m[1], m[3] - m[1] * m[2], m[3] - m[1] * m[2], m[4] - m[2] * m[2];
    return e;
  }

  /// True when Z^2 is almost surely constant (two-point symmetric support).
  bool square_is_degenerate() const noexcept {
    if (base_.density()) return false;
    const double c2 = base_.atoms().front().location * base_.atoms().front().location;
    return std::all_of(base_.atoms().begin(), base_.atoms().end(),
                       [c2](const Atom& a) { return std::abs(a.location * a.location - c2) <= 1e-14 * (1 + c2); });
  }

 private:
  Measure1D base_;
  MomentSummary summary_;
};

/// Log-Laplace of the law of Z itself (the d = 1 case).
class LogLaplace1D {
 public:
  static constexpr int dim = 1;

  explicit LogLaplace1D(Measure1D base) : base_(std::move(base)) {}

  const Measure1D& base() const noexcept { return base_; }
  bool in_domain(const Vec<1>&) const noexcept { return true; }

  double value(const Vec<1>& p) const { return tilted_integrals(base_, p[0], 0.0).log_total; }

  LaplaceEval<1> evaluate(const Vec<1>& p) const {
    const auto ti = tilted_integrals(base_, p[0], 0.0);
    LaplaceEval<1> e;
    e.value = ti.log_total;
    e.gradient[0] = ti.moments[1];
    e.hessian(0, 0) = ti.moments[2] - ti.moments[1] * ti.moments[1];
    return e;
  }

 private:
  Measure1D base_;
};

struct SolverSettings {
  double gradient_tolerance = 1e-10;
  int max_iterations = 100;
  double condition_limit = 1e12;
};

template <int D>
struct TransformResult {
  double value = kInf;
  Vec<D> argmax = Vec<D>::Zero();
  Mat<D> hess_I = Mat<D>::Zero();  ///< inverse Hessian of L at the argmax
  bool converged = false;
  bool degenerate = false;
  int iterations = 0;
  double residual = kInf;  ///< |grad L(argmax) - x|_inf
  std::string message;
};

/// Cramer transform I(x) = sup_p <p, x> - L(p) of a log-Laplace `Lift`.
template <class Lift>
class RateFunction {
 public:
  static constexpr int D = Lift::dim;

  explicit RateFunction(Lift source, SolverSettings settings = {}) : source_(std::move(source)), settings_(settings) {}

  const Lift& source() const noexcept { return source_; }
  const SolverSettings& settings() const noexcept { return settings_; }

  /// Damped Newton on the dual objective L(p) - <p, x> from p = 0.
  TransformResult<D> solve(const Vec<D>& target, Vec<D> start = Vec<D>::Zero()) const {
    if constexpr (D == 2) {
      if (source_.square_is_degenerate()) return solve_degenerate(target);
    }
    TransformResult<D> out;
    Vec<D> p = start;
    for (int it = 0; it <= settings_.max_iterations; ++it) {
      const auto ev = source_.evaluate(p);
      const Vec<D> g = ev.gradient - target;
      out.iterations = it;
      out.argmax = p;
      out.residual = g.template lpNorm<Eigen::Infinity>();
      out.value = p.dot(target) - ev.value;
      if (out.residual <= settings_.gradient_tolerance) {
        out.converged = true;
        out.hess_I = ev.hessian.inverse();
        return out;
      }
      if (it == settings_.max_iterations) break;
      Eigen::SelfAdjointEigenSolver<Mat<D>> eig(ev.hessian, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      if (!(lo > 0.0) || hi / lo > settings_.condition_limit) {
        out.degenerate = true;
        out.message = "Hessian of L is numerically singular";
        return out;
      }
      const Vec<D> step = -ev.hessian.ldlt().solve(g);
      const double phi0 = ev.value - p.dot(target);
      const double slope = g.dot(step);
      double t = 1.0;
      bool moved = false;
      while (t > 1e-14) {
        const Vec<D> q = p + t * step;
        if (source_.in_domain(q)) {
          const double phi = source_.value(q) - q.dot(target);
          if (std::isfinite(phi) && phi <= phi0 + 1e-4 * t * slope + 1e-15 * (1.0 + std::abs(phi0))) {
            p = q;
            moved = true;
            break;
          }
        }
        t *= 0.5;
      }
      if (!moved) {
        out.message = "line search stalled";
        return out;
      }
    }
    out.message = "no convergence within " + std::to_string(settings_.max_iterations) + " iterations";
    return out;
  }

 private:
  // Z^2 = c^2 almost surely: I is finite only on y = c^2 and reduces to the
  // one-dimensional transform of Z in the x direction.
  TransformResult<D> solve_degenerate(const Vec<D>& target) const requires(D == 2) {
    TransformResult<2> out;
    out.degenerate = true;
    const double c2 = source_.base().atoms().front().location * source_.base().atoms().front().location;
    if (std::abs(target[1] - c2) > 1e-9 * (1.0 + c2)) {
      out.message = "degenerate lift: I is infinite off y = " + std::to_string(c2);
      return out;
    }
    RateFunction<LogLaplace1D> reduced(LogLaplace1D(source_.base()), settings_);
    const auto r = reduced.solve(Vec<1>(target[0]));
    out.converged = r.converged;
    out.iterations = r.iterations;
    out.residual = r.residual;
    out.value = r.value;
    out.argmax << r.argmax[0], 0.0;
    out.hess_I << r.hess_I(0, 0), 0.0, 0.0, kInf;
    out.message = r.converged ? "reduced to the x direction; v is a free direction" : r.message;
    return out;
  }

  Lift source_;
  SolverSettings settings_;
};

// ---- free-function surface --------------------------------------------------

inline double log_laplace(const LogLaplace& L, double u, double v) { return L.value(u, v); }

inline LaplaceEval<2> log_laplace_grad_hess(const LogLaplace& L, double u, double v) {
  return L.evaluate(Vec<2>(u, v));
}

inline TransformResult<2> cramer_transform(const RateFunction<LogLaplace>& R, double x, double y) {
  return R.solve(Vec<2>(x, y));
}

/// I(0, 0) = -ln rho({0}); the origin is a boundary point of the domain.
inline double rate_at_origin(const RateFunction<LogLaplace>& R) {
  const double m0 = R.source().base().mass_at_zero();
  return m0 > 0.0 ? -std::log(m0) : kInf;
}

template <int D>
struct DomainProbe {
  bool inside = false;
  int iterations = 0;
  double residual = kInf;
  double value = kInf;
  std::optional<bool> expected;  ///< predicted membership when known in closed form
  std::string message;
};

/// Admissible-domain membership decided by convergence of the dual solve.
template <class Lift>
DomainProbe<Lift::dim> admissible_domain_probe(const RateFunction<Lift>& R, const Vec<Lift::dim>& x) {
  const auto r = R.solve(x);
  DomainProbe<Lift::dim> out{r.converged && !r.degenerate, r.iterations, r.residual, r.value, std::nullopt, r.message};
  if constexpr (Lift::dim == 2) {
    const auto& m = R.source().base();
    if (m.is_atomic() == false && m.atoms().empty()) {
      // convex hull of the parabola arc over the density's support
      double ymax = kInf;
      if (m.density()->kind() == Density::Kind::table) ymax = std::pow(m.density()->support_radius(), 2);
      out.expected = x[0] * x[0] < x[1] && x[1] < ymax;
    }
  }
  return out;
}

/// (I - F_g)(x, y) divided by its quartic/quadratic leading form at (0, sigma^2).
inline double rate_expansion_residual(const RateFunction<LogLaplace>& R, const Interaction& g, double x, double y) {
  const auto& s = R.source().summary();
  const double sig2 = s.sigma2;
  if (!(s.mu4 > sig2 * sig2 * (1 + 1e-12)))
    throw validation_error("expansion requires a support with at least three points");
  const double form = g.fluctuation_constant(sig2, s.mu4) * std::pow(x, 4) / (12.0 * std::pow(sig2, 4)) +
                      (y - sig2) * (y - sig2) / (2.0 * (s.mu4 - sig2 * sig2));
  if (form == 0.0) return 1.0;
  const auto r = cramer_transform(R, x, y);
  if (!r.converged) throw numeric_error("Cramer transform did not converge at the probe point");
  return (r.value - g.F(x, y)) / form;
}

}  // namespace cwsoc
