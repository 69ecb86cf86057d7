#pragma once

// Triangular approximation of the identity k_c, its Laplace transform, and
// the smoothed density phi_{n,c}(x) = int k_c(s - n x) d nu^{*n}(s) compared
// with its saddle-point asymptotic.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cwsoc/cramer.hpp"
#include "cwsoc/errors.hpp"
#include "cwsoc/measure.hpp"
#include "cwsoc/parallel.hpp"
#include "cwsoc/quadrature.hpp"
#include "cwsoc/rng.hpp"
#include "cwsoc/transforms.hpp"

namespace cwsoc {

/// k_c(x) = c^{-d} prod_j max(1 - |x_j / c|, 0).
struct TriangularKernel {
  double c = 1.0;
  int d = 1;

  TriangularKernel(double width, int dim) : c(width), d(dim) {
    if (!(c > 0.0)) throw validation_error("kernel width must be positive");
    if (d != 1 && d != 2) throw validation_error("kernel dimension must be 1 or 2");
  }

  double operator()(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d) throw validation_error("kernel: dimension mismatch");
    double v = 1.0;
    for (double xj : x) v *= std::max(1.0 - std::abs(xj) / c, 0.0) / c;
    return v;
  }
  double operator()(double x) const { return std::max(1.0 - std::abs(x) / c, 0.0) / c; }
  double operator()(double x, double y) const { return (*this)(x) * (*this)(y); }
};

/// One factor 2(cosh w - 1)/w^2 of the kernel's Laplace transform.
inline std::complex<double> kernel_laplace_factor(std::complex<double> w) {
  if (std::abs(w) < 1e-4) {
    const auto w2 = w * w;
    return 1.0 + w2 / 12.0 + w2 * w2 / 360.0 + w2 * w2 * w2 / 20160.0;
  }
  return 2.0 * (std::cosh(w) - 1.0) / (w * w);
}

/// int e^{<x, z>} k_c(x) dx = prod_j 2(cosh(c z_j) - 1)/(c z_j)^2.
inline std::complex<double> kernel_laplace(double c, std::span<const std::complex<double>> z) {
  std::complex<double> v{1.0, 0.0};
  for (const auto& zj : z) v *= kernel_laplace_factor(c * zj);
  return v;
}

struct KernelFtBound {
  double M = 0.0;          ///< max of the grid value and the tail bound
  double grid_max = 0.0;   ///< max over the grid of (1+s^2)|f(u+is)|, |s| <= 1000
  double tail_bound = 0.0; ///< 4 sup_K (cosh u + 1), valid for |s| > 1
};

/// M with sup_{u in [lo, hi]} |2(cosh(u+is) - 1)/(u+is)^2| <= M / (1 + s^2).
inline KernelFtBound kernel_ft_bound(double lo, double hi, double s_max = 1000.0, double s_step = 0.01) {
  if (!(lo <= hi)) throw validation_error("kernel_ft_bound: empty interval");
  KernelFtBound b;
  const int nu = lo == hi ? 1 : 41;
  const int ns = static_cast<int>(std::ceil(s_max / s_step));
  for (int i = 0; i < nu; ++i) {
    const double u = nu == 1 ? lo : lo + (hi - lo) * i / (nu - 1);
    b.tail_bound = std::max(b.tail_bound, 4.0 * (std::cosh(u) + 1.0));
    for (int j = 0; j <= ns; ++j) {
      const double s = j * s_step;
      b.grid_max = std::max(b.grid_max, (1.0 + s * s) * std::abs(kernel_laplace_factor({u, s})));
    }
  }
  b.M = std::max(b.grid_max, b.tail_bound);
  return b;
}

struct PhiEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Estimate of E_lambda[k_c(r) e^{-<lambda, r>}] with phi = e^{-nI} times it
  /// (d = 2 only; avoids underflow in ratios).
  double tilted_mean = 0.0;
  double tilted_se = 0.0;
  std::size_t samples = 0;
  std::size_t nonzero = 0;
  bool high_variance = false;
};

/// nu^{*n} in closed form: Gaussian, or a finite set of atoms.
class ExplicitLaw1D {
 public:
  static ExplicitLaw1D from(const Measure1D& nu) {
    ExplicitLaw1D law;
    if (nu.is_atomic()) {
      law.atoms_ = nu.atoms();
    } else if (nu.atoms().empty() && nu.density()->kind() == Density::Kind::gaussian) {
      law.gaussian_ = true;
      law.sigma2_ = nu.density()->scale() * nu.density()->scale();
    } else {
      throw validation_error("no closed-form n-fold convolution for this measure (need Gaussian or atomic)");
    }
    return law;
  }

  bool gaussian() const noexcept { return gaussian_; }
  double sigma2() const noexcept { return sigma2_; }

  /// Atoms of nu^{*n} (merged by location).
  std::vector<Atom> convolution_atoms(int n, std::size_t budget = 2000000) const {
    std::vector<Atom> cur{{0.0, 1.0}};
    for (int k = 0; k < n; ++k) {
      std::vector<Atom> next;
      next.reserve(cur.size() * atoms_.size());
      for (const auto& a : cur)
        for (const auto& b : atoms_) next.push_back({a.location + b.location, a.mass * b.mass});
      std::sort(next.begin(), next.end(), [](const Atom& l, const Atom& r) { return l.location < r.location; });
      cur.clear();
      for (const auto& a : next) {
        if (!cur.empty() && std::abs(cur.back().location - a.location) <= 1e-12 * (1.0 + std::abs(a.location)))
          cur.back().mass += a.mass;
        else
          cur.push_back(a);
      }
      if (cur.size() > budget) throw validation_error("n-fold convolution exceeds the atom budget");
    }
    return cur;
  }

 private:
  bool gaussian_ = false;
  double sigma2_ = 0.0;
  std::vector<Atom> atoms_;
};

/// phi_{n,c} for d = 1 with an explicit n-fold law.
class SmoothedDensity1D {
 public:
  SmoothedDensity1D(const Measure1D& nu, int n, double c) : law_(ExplicitLaw1D::from(nu)), n_(n), kernel_(c, 1) {
    if (n < 1) throw validation_error("n must be >= 1");
    if (!law_.gaussian()) atoms_ = law_.convolution_atoms(n);
  }

  int n() const noexcept { return n_; }
  double c() const noexcept { return kernel_.c; }

  PhiEstimate phi(double x) const {
    PhiEstimate e;
    const double centre = n_ * x;
    const double c = kernel_.c;
    if (law_.gaussian()) {
      const double var = n_ * law_.sigma2();
      const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
      auto f = [&](double s) { return kernel_(s - centre) * norm * std::exp(-0.5 * s * s / var); };
      const double breaks[] = {centre - c, centre, centre + c};
      const auto r = quad::adaptive(f, std::span<const double>(breaks), {1e-300, 1e-14, 30});
      e.value = r.value;
      e.std_error = r.error;
    } else {
      for (const auto& a : atoms_) e.value += a.mass * kernel_(a.location - centre);
    }
    e.tilted_mean = e.value;
    e.nonzero = e.value > 0.0 ? 1 : 0;
    return e;
  }

 private:
  ExplicitLaw1D law_;
  int n_;
  TriangularKernel kernel_;
  std::vector<Atom> atoms_;
};

struct Phi2DSettings {
  std::size_t samples = 1000000;
  std::uint64_t seed = 20240101;
  std::size_t chunk = 4096;
  std::size_t min_nonzero = 100;
};

namespace detail {

// E[k_c(a + w1 + w2) e^{-<lambda, a + w1 + w2>}] over w_i = (z_i, z_i^2),
// z_i i.i.d. from the tilted law, computed by quadrature in the last two
// coordinates.
class LastPairIntegrator {
 public:
  LastPairIntegrator(const TiltedMeasure& mu, double c) : mu_(mu), c_(c) {}

  double operator()(double a, double b) const {
    const auto& atoms = mu_.base().atoms();
    const auto& p = mu_.atom_masses();
    const double alpha = mu_.base().density() ? mu_.ac_fraction() : 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const double zi = atoms[i].location;
      for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double zj = atoms[j].location;
        acc += p[i] * p[j] * K(a + zi + zj, b + zi * zi + zj * zj);
      }
      if (alpha > 0.0) acc += 2.0 * p[i] * alpha * atom_density(a + zi, b + zi * zi);
    }
    if (alpha > 0.0) acc += alpha * alpha * density_density(a, b);
    return acc;
  }

 private:
  double tri(double r) const { return std::max(1.0 - std::abs(r) / c_, 0.0) / c_; }
  double K(double r1, double r2) const {
    const double k = tri(r1) * tri(r2);
    return k == 0.0 ? 0.0 : k * std::exp(-(mu_.u() * r1 + mu_.v() * r2));
  }

  template <class F>
  static double integrate_pieces(F&& f, std::vector<double> pts, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const auto br = quad::make_breaks(std::move(pts), lo, hi);
    return quad::fixed_panels<12>(f, std::span<const double>(br));
  }

  // z ranges where |a' + z| <= c and |b' + z^2| <= c
  std::vector<std::pair<double, double>> window(double a, double b, std::vector<double>& kinks) const {
    std::vector<std::pair<double, double>> out;
    const double zlo = -a - c_, zhi = -a + c_;
    const double qhi = -b + c_;
    if (qhi <= 0.0) return out;
    const double qlo = std::max(0.0, -b - c_);
    const double rlo = std::sqrt(qlo), rhi = std::sqrt(qhi);
    kinks = {-a};
    if (-b > 0.0) {
      kinks.push_back(std::sqrt(-b));
      kinks.push_back(-std::sqrt(-b));
    }
    for (auto [l, h] : {std::pair{-rhi, -rlo}, std::pair{rlo, rhi}}) {
      const double L = std::max(l, zlo), H = std::min(h, zhi);
      if (H > L) out.emplace_back(L, H);
    }
    return out;
  }

  double atom_density(double a, double b) const {
    std::vector<double> kinks;
    double acc = 0.0;
    for (auto [L, H] : window(a, b, kinks))
      acc += integrate_pieces([&](double z) { return mu_.ac_pdf(z) * K(a + z, b + z * z); }, kinks, L, H);
    return acc;
  }

  // z1 = q/2 + w/sqrt2, z2 = q/2 - w/sqrt2: z1 + z2 = q, z1^2 + z2^2 = q^2/2 + w^2.
  double density_density(double a, double b) const {
    const double qlo = -a - c_, qhi = -a + c_;
    std::vector<double> qk{-a};
    for (double level : {-b - c_, -b, -b + c_})
      if (level > 0.0) {
        qk.push_back(std::sqrt(2.0 * level));
        qk.push_back(-std::sqrt(2.0 * level));
      }
    const double r2 = std::numbers::sqrt2;
    auto inner = [&](double q) {
      const double base = -b - 0.5 * q * q;
      const double hi = base + c_;
      if (hi <= 0.0) return 0.0;
      const double lo = std::max(0.0, base - c_);
      std::vector<double> wk;
      if (base > 0.0) wk.push_back(std::sqrt(base));
      auto f = [&](double w) {
        const double z1 = 0.5 * q + w / r2, z2 = 0.5 * q - w / r2;
        const double kv = K(a + q, b + 0.5 * q * q + w * w);
        if (kv == 0.0) return 0.0;
        return (mu_.ac_pdf(z1) * mu_.ac_pdf(z2) + mu_.ac_pdf(z2) * mu_.ac_pdf(z1)) * kv;
      };
      // both signs of w give the same (z1, z2) pair swapped
      return integrate_pieces(f, wk, std::sqrt(lo), std::sqrt(hi)) / r2;
    };
    return integrate_pieces(inner, qk, qlo, qhi);
  }

  const TiltedMeasure& mu_;
  double c_;
};

}  // namespace detail

/// phi_{n,c} for d = 2 and nu = nu_rho, by tilted Monte Carlo at the dual
/// point lambda(x, y) with the last two coordinates integrated exactly.
class SmoothedDensity2D {
 public:
  SmoothedDensity2D(Measure1D rho, int n, double c, Phi2DSettings settings = {})
      : rate_(LogLaplace(rho)), rho_(std::move(rho)), n_(n), c_(c), settings_(settings) {
    if (n < 2) throw validation_error("d = 2 smoothed density needs n >= 2");
    if (!(c > 0.0)) throw validation_error("kernel width must be positive");
  }

  int n() const noexcept { return n_; }
  double c() const noexcept { return c_; }
  const RateFunction<LogLaplace>& rate() const noexcept { return rate_; }
  const Phi2DSettings& settings() const noexcept { return settings_; }

  PhiEstimate phi(double x, double y) const {
    const auto dual = rate_.solve(Vec<2>(x, y));
    if (!dual.converged) throw numeric_error("phi: dual point did not converge: " + dual.message);
    return phi_at(x, y, dual);
  }

  PhiEstimate phi_at(double x, double y, const TransformResult<2>& dual) const {
    const TiltedMeasure mu(rho_, dual.argmax[0], dual.argmax[1]);
    const detail::LastPairIntegrator last(mu, c_);
    const double nx = n_ * x, ny = n_ * y;
    struct Part {
      double sum = 0.0, sum2 = 0.0;
      std::size_t nonzero = 0;
    };
    const std::size_t total = n_ == 2 ? 1 : settings_.samples;
    const std::size_t chunks = (total + settings_.chunk - 1) / settings_.chunk;
    auto parts = parallel_chunks<Part>(chunks, [&](std::size_t k) {
      Rng rng(settings_.seed, k);
      Part part;
      const std::size_t lo = k * settings_.chunk, hi = std::min(total, lo + settings_.chunk);
      for (std::size_t i = lo; i < hi; ++i) {
        double s = 0.0, t = 0.0;
        for (int j = 0; j < n_ - 2; ++j) {
          const double z = mu.draw(rng);
          s += z;
          t += z * z;
        }
        const double v = last(s - nx, t - ny);
        part.sum += v;
        part.sum2 += v * v;
        part.nonzero += v > 0.0 ? 1 : 0;
      }
      return part;
    });
    Part all;
    for (const auto& p : parts) {
      all.sum += p.sum;
      all.sum2 += p.sum2;
      all.nonzero += p.nonzero;
    }
    PhiEstimate e;
    e.samples = total;
    e.nonzero = all.nonzero;
    const double N = static_cast<double>(total);
    e.tilted_mean = all.sum / N;
    e.tilted_se = total > 1 ? std::sqrt(std::max(0.0, all.sum2 / N - e.tilted_mean * e.tilted_mean) / (N - 1.0)) : 0.0;
    const double scale = std::exp(-n_ * dual.value);
    e.value = scale * e.tilted_mean;
    e.std_error = scale * e.tilted_se;
    e.high_variance = n_ > 2 && (all.nonzero < settings_.min_nonzero || e.tilted_se > 0.5 * e.tilted_mean);
    return e;
  }

 private:
  RateFunction<LogLaplace> rate_;
  Measure1D rho_;
  int n_;
  double c_;
  Phi2DSettings settings_;
};

struct Theorem3Row {
  std::vector<double> x;
  int n = 0;
  double c = 0.0;
  double phi = 0.0;
  double se = 0.0;
  double asymptotic = 0.0;
  double ratio = 0.0;
  double ratio_se = 0.0;
  bool high_variance = false;
};

/// d = 1: rows (x, phi, (2 pi n)^{-1/2} (J'')^{1/2} e^{-nJ}, ratio).
inline std::vector<Theorem3Row> theorem3_comparison(const Measure1D& nu, int n, double c,
                                                    const std::vector<double>& points) {
  if (!cramer_condition_1d(nu))
    throw validation_error("Cramer condition (C) fails for this measure (no absolutely continuous part); "
                           "the local asymptotic does not apply");
  const SmoothedDensity1D sd(nu, n, c);
  const RateFunction<LogLaplace1D> R{LogLaplace1D(nu)};
  std::vector<Theorem3Row> rows;
  for (double x : points) {
    const auto r = R.solve(Vec<1>(x));
    if (!r.converged) throw numeric_error("rate function did not converge at x = " + std::to_string(x));
    const auto e = sd.phi(x);
    Theorem3Row row;
    row.x = {x};
    row.n = n;
    row.c = c;
    row.phi = e.value;
    row.se = e.std_error;
    row.asymptotic = std::sqrt(r.hess_I(0, 0) / (2.0 * std::numbers::pi * n)) * std::exp(-n * r.value);
    row.ratio = row.phi / row.asymptotic;
    row.ratio_se = row.se / row.asymptotic;
    rows.push_back(row);
  }
  return rows;
}

/// d = 2 for nu_rho. `verdict` is the Cramer-condition verdict for rho.
inline std::vector<Theorem3Row> theorem3_comparison(const SmoothedDensity2D& sd,
                                                    const std::vector<std::pair<double, double>>& points,
                                                    CramerReport::Verdict verdict) {
  if (verdict == CramerReport::Verdict::fail)
    throw validation_error("Cramer condition (C) fails for rho; the local asymptotic does not apply");
  std::vector<Theorem3Row> rows;
  const int n = sd.n();
  for (auto [x, y] : points) {
    const auto dual = sd.rate().solve(Vec<2>(x, y));
    if (!dual.converged) throw numeric_error("rate function did not converge at the probe point");
    const auto e = sd.phi_at(x, y, dual);
    const double det = dual.hess_I.determinant();
    const double prefactor = std::sqrt(det) / (2.0 * std::numbers::pi * n);
    Theorem3Row row;
    row.x = {x, y};
    row.n = n;
    row.c = sd.c();
    row.phi = e.value;
    row.se = e.std_error;
    row.asymptotic = prefactor * std::exp(-n * dual.value);
    row.ratio = e.tilted_mean / prefactor;
    row.ratio_se = e.tilted_se / prefactor;
    row.high_variance = e.high_variance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cwsoc
