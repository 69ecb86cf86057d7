#pragma once

// Symmetric probability measures on the line: finitely many atoms plus an
// optional absolutely continuous part with a Gaussian-dominated density.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/normal_distribution.hpp>

#include "cwsoc/errors.hpp"
#include "cwsoc/expr.hpp"
#include "cwsoc/quadrature.hpp"
#include "cwsoc/rng.hpp"

namespace cwsoc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

/// Normalised probability density of the absolutely continuous component,
/// together with a domination pair (A, v): density(z) <= A exp(-v z^2).
class Density {
 public:
  enum class Kind { gaussian, table, expr };

  static Density gaussian(double scale = 1.0) {
    if (!(scale > 0.0)) throw validation_error("gaussian density: scale must be positive");
    Density d;
    d.kind_ = Kind::gaussian;
    d.scale_ = scale;
    d.dom_A_ = 1.0 / (scale * std::sqrt(2.0 * std::numbers::pi));
    d.dom_v_ = 1.0 / (2.0 * scale * scale);
    d.radius_ = 10.0 * scale;
    d.norm_ = 1.0;
    return d;
  }

  /// Piecewise-linear density through (z_i, p_i), zero outside the table.
  static Density table(std::vector<double> z, std::vector<double> p, double dom_A, double dom_v) {
    if (z.size() != p.size() || z.size() < 2) throw validation_error("table density: need >= 2 matching nodes");
    for (std::size_t i = 1; i < z.size(); ++i)
      if (!(z[i] > z[i - 1])) throw validation_error("table density: nodes must be strictly increasing");
    for (double v : p)
      if (!(v >= 0.0)) throw validation_error("table density: values must be nonnegative");
    Density d;
    d.kind_ = Kind::table;
    d.table_z_ = std::make_shared<const std::vector<double>>(std::move(z));
    d.table_p_ = std::make_shared<const std::vector<double>>(std::move(p));
    d.radius_ = std::max(std::abs(d.table_z_->front()), std::abs(d.table_z_->back()));
    d.set_domination(dom_A, dom_v);
    d.normalise();
    return d;
  }

  static Density expression(std::string source, double dom_A, double dom_v, double radius) {
    if (!(radius > 0.0)) throw validation_error("expr density: support radius must be positive");
    Density d;
    d.kind_ = Kind::expr;
    d.expr_ = std::make_shared<const Expression>(std::move(source));
    d.radius_ = radius;
    d.set_domination(dom_A, dom_v);
    d.normalise();
    return d;
  }

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  double domination_A() const noexcept { return dom_A_; }
  double domination_v() const noexcept { return dom_v_; }
  double support_radius() const noexcept { return radius_; }
  const std::vector<double>& table_nodes() const { return *table_z_; }
  const std::vector<double>& table_values() const { return *table_p_; }
  const std::string& expression_source() const { return expr_->source(); }

  void set_support_radius(double r) {
    if (!(r > 0.0)) throw validation_error("support radius must be positive");
    radius_ = r;
    if (kind_ != Kind::gaussian) normalise();
  }
  void set_domination(double A, double v) {
    if (!(A > 0.0) || !(v > 0.0)) throw validation_error("domination pair (A, v) must be positive");
    dom_A_ = A;
    dom_v_ = v;
  }

  double pdf(double z) const {
    switch (kind_) {
      case Kind::gaussian: {
        const double t = z / scale_;
        return dom_A_ * std::exp(-0.5 * t * t);
      }
      case Kind::table: return raw_table(z) / norm_;
      case Kind::expr: return (*expr_)(z) / norm_;
    }
    return 0.0;
  }

  /// log pdf; exact for the Gaussian kind far past the underflow of pdf.
  double log_pdf(double z) const {
    if (kind_ == Kind::gaussian) {
      const double t = z / scale_;
      return std::log(dom_A_) - 0.5 * t * t;
    }
    const double p = pdf(z);
    return p > 0.0 ? std::log(p) : -kInf;
  }

  /// Closed-form Fourier transform of (Z, Z^2) when one is known.
  std::optional<std::complex<double>> closed_form_char(double s, double t) const {
    if (kind_ != Kind::gaussian) return std::nullopt;
    const double s2 = scale_ * scale_;
    const std::complex<double> w(1.0, -2.0 * t * s2);
    return std::exp(-0.5 * s * s * s2 / w) / std::sqrt(w);
  }

  /// Draw from the density by rejection against the domination envelope.
  double sample(Rng& rng) const {
    boost::random::normal_distribution<double> normal;
    if (kind_ == Kind::gaussian) return scale_ * normal(rng);
    const double env_sd = 1.0 / std::sqrt(2.0 * dom_v_);
    for (;;) {
      const double z = env_sd * normal(rng);
      const double ratio = pdf(z) / (dom_A_ * std::exp(-dom_v_ * z * z));
      if (rng.uniform() < ratio) return z;
    }
  }

  /// Largest ratio density / envelope found on a probe grid (should be <= 1).
  double domination_defect() const {
    double worst = 0.0;
    const double r = std::max(radius_, 1.0);
    for (int i = -4000; i <= 4000; ++i) {
      const double z = r * i / 4000.0;
      worst = std::max(worst, pdf(z) / (dom_A_ * std::exp(-dom_v_ * z * z)));
    }
    return worst;
  }

 private:
  double raw_table(double z) const {
    const auto& zs = *table_z_;
    const auto& ps = *table_p_;
    if (z < zs.front() || z > zs.back()) return 0.0;
    auto it = std::upper_bound(zs.begin(), zs.end(), z);
    if (it == zs.end()) return ps.back();
    const std::size_t i = static_cast<std::size_t>(it - zs.begin());
    const double w = (z - zs[i - 1]) / (zs[i] - zs[i - 1]);
    return (1.0 - w) * ps[i - 1] + w * ps[i];
  }

  void normalise() {
    norm_ = 1.0;
    std::vector<double> breaks{-radius_, 0.0, radius_};
    if (kind_ == Kind::table) breaks = *table_z_;
    auto res = quad::adaptive([this](double z) { return pdf(z); }, std::span<const double>(breaks), {1e-14, 1e-13, 30});
    if (!(res.value > 0.0) || !std::isfinite(res.value)) throw validation_error("density integrates to zero or diverges");
    norm_ = res.value;
  }

  Kind kind_ = Kind::gaussian;
  double scale_ = 1.0;
  double dom_A_ = 0.0;
  double dom_v_ = 0.0;
  double radius_ = 10.0;
  double norm_ = 1.0;
  std::shared_ptr<const std::vector<double>> table_z_;
  std::shared_ptr<const std::vector<double>> table_p_;
  std::shared_ptr<const Expression> expr_;
};

struct MomentSummary {
  double sigma2 = 0.0;
  double mu4 = 0.0;
  double mass_at_zero = 0.0;
  double abs_mean = 0.0;   ///< E|Z|, used for Lipschitz bounds
  double tail_bound = 0.0; ///< bound on the neglected density tail of z^4
};

/// Log-masses and raw moments of e^{uz+vz^2} rho(dz), split by component.
struct TiltedIntegrals {
  double log_total = 0.0;         ///< ln of the total mass (the log-Laplace value)
  std::vector<double> log_atoms;  ///< ln(m_i) + u z_i + v z_i^2
  double log_ac = -kInf;          ///< ln(a) + ln of the density integral
  std::array<double, 5> moments{};     ///< E[z^k], k = 0..4, under the normalised tilt
  std::array<double, 5> ac_moments{};  ///< same, restricted to the density part
  double quadrature_error = 0.0;
};

class Measure1D {
 public:
  Measure1D(std::vector<Atom> atoms, std::optional<Density> density, std::optional<double> ac_mass = std::nullopt)
      : atoms_(std::move(atoms)), density_(std::move(density)) {
    double b = 0.0;
    for (const auto& at : atoms_) {
      if (!(at.mass > 0.0 && at.mass <= 1.0)) throw validation_error("atom masses must lie in (0, 1]");
      if (!std::isfinite(at.location)) throw validation_error("atom locations must be finite");
      b += at.mass;
    }
    std::vector<double> locs;
    for (const auto& at : atoms_) locs.push_back(at.location);
    std::sort(locs.begin(), locs.end());
    if (std::adjacent_find(locs.begin(), locs.end()) != locs.end()) throw validation_error("atom locations must be distinct");
    discrete_mass_ = b;
    if (density_) {
      ac_mass_ = ac_mass.value_or(1.0 - b);
      if (!(ac_mass_ > 0.0)) throw validation_error("density component needs positive mass");
    } else {
      ac_mass_ = 0.0;
      if (ac_mass && *ac_mass != 0.0) throw validation_error("ac mass given without a density");
    }
    if (std::abs(ac_mass_ + discrete_mass_ - 1.0) > 1e-12)
      throw validation_error("total mass must be 1 (a + b = " + std::to_string(ac_mass_ + discrete_mass_) + ")");
    if (atoms_.empty() && !density_) throw validation_error("measure has neither atoms nor density");
    cumulative_.reserve(atoms_.size());
    double acc = 0.0;
    for (const auto& at : atoms_) cumulative_.push_back(acc += at.mass);
    v0_ = density_ ? 0.5 * density_->domination_v() : 1.0;
  }

  static Measure1D standard_gaussian() { return {{}, Density::gaussian(1.0)}; }
  static Measure1D rademacher() { return {{{-1.0, 0.5}, {1.0, 0.5}}, std::nullopt}; }
  /// Symmetric three-point law p delta_{-1} + (1-2p) delta_0 + p delta_1.
  static Measure1D three_point(double p = 0.25) { return {{{-1.0, p}, {0.0, 1.0 - 2.0 * p}, {1.0, p}}, std::nullopt}; }
  /// 1/16 delta_{-1} + 3/4 delta_0 + 1/16 delta_1 + (1/8) N(0,1).
  static Measure1D rho0() {
    return {{{-1.0, 1.0 / 16}, {0.0, 0.75}, {1.0, 1.0 / 16}}, Density::gaussian(1.0), 0.125};
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const std::optional<Density>& density() const noexcept { return density_; }
  double ac_mass() const noexcept { return ac_mass_; }
  double discrete_mass() const noexcept { return discrete_mass_; }
  double v0() const noexcept { return v0_; }
  bool is_atomic() const noexcept { return !density_; }

  double mass_at_zero() const noexcept {
    for (const auto& at : atoms_)
      if (at.location == 0.0) return at.mass;
    return 0.0;
  }

  /// Upper end of the v-range of D_L (+inf for bounded atomic measures).
  double laplace_v_limit() const noexcept { return density_ ? density_->domination_v() : kInf; }

  /// Largest asymmetry found: unmatched atom mass or density mismatch on a grid.
  double symmetry_defect() const {
    double worst = 0.0;
    for (const auto& at : atoms_) {
      double mirror = 0.0;
      for (const auto& other : atoms_)
        if (std::abs(other.location + at.location) <= 1e-12 * (1.0 + std::abs(at.location))) mirror = other.mass;
      worst = std::max(worst, std::abs(mirror - at.mass));
    }
    if (density_) {
      const double r = density_->support_radius();
      for (int i = 0; i <= 2000; ++i) {
        const double z = r * i / 2000.0;
        worst = std::max(worst, std::abs(density_->pdf(z) - density_->pdf(-z)));
      }
    }
    return worst;
  }

  void require_symmetric() const {
    const double d = symmetry_defect();
    if (d > 1e-10) throw validation_error("measure is not symmetric (defect " + std::to_string(d) + ")");
  }

  /// One i.i.d. draw: discrete part by inverse CDF, density part by rejection.
  double draw(Rng& rng) const {
    if (!atoms_.empty()) {
      const double u = rng.uniform();
      if (u < discrete_mass_ || !density_) {
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return atoms_[static_cast<std::size_t>(it - cumulative_.begin())].location;
      }
    }
    return density_->sample(rng);
  }

  std::vector<double> sample(std::size_t count, std::uint64_t seed) const {
    if (count < 1) throw validation_error("sample count must be >= 1");
    Rng rng(seed);
    std::vector<double> out(count);
    for (auto& x : out) x = draw(rng);
    return out;
  }

 private:
  std::vector<Atom> atoms_;
  std::optional<Density> density_;
  double ac_mass_ = 0.0;
  double discrete_mass_ = 0.0;
  double v0_ = 1.0;
  std::vector<double> cumulative_;
};

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
  double mx = -kInf;
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace detail

/// Integrals of z^k e^{uz+vz^2} against rho for k = 0..4, computed with
/// log-sum-exp stabilisation. log_total is +inf outside D_L.
inline TiltedIntegrals tilted_integrals(const Measure1D& m, double u, double v) {
  TiltedIntegrals out;
  std::vector<double> logs;
  for (const auto& at : m.atoms()) {
    const double z = at.location;
    out.log_atoms.push_back(std::log(at.mass) + u * z + v * z * z);
    logs.push_back(out.log_atoms.back());
  }
  Eigen::Array<double, 5, 1> ac = Eigen::Array<double, 5, 1>::Zero();
  if (const auto& f = m.density()) {
    const double vbar = f->domination_v();
    if (!(v < vbar)) {
      out.log_total = kInf;
      out.log_ac = kInf;
      return out;
    }
    const double gap = vbar - v;
    const double width = 1.0 / std::sqrt(2.0 * gap);
    const double peak = u * width * width;
    const double shift = u * u / (4.0 * gap);
    double reach = std::max(f->support_radius(), std::abs(peak) + std::sqrt(46.0 / gap));
    if (f->kind() == Density::Kind::table) reach = f->support_radius();
    std::vector<double> pts{0.0, peak, peak - 2 * width, peak + 2 * width, peak - 8 * width, peak + 8 * width};
    if (f->kind() == Density::Kind::table) pts.insert(pts.end(), f->table_nodes().begin(), f->table_nodes().end());
    const auto breaks = quad::make_breaks(std::move(pts), -reach, reach);
    auto integrand = [&](double z) {
      // in log space: far out pdf underflows to 0 while the tilt overflows
      const double lp = f->log_pdf(z);
      const double w = lp > -kInf ? std::exp(lp + u * z + v * z * z - shift) : 0.0;
      const double z2 = z * z;
      Eigen::Array<double, 5, 1> r;
      r << w, w * z, w * z2, w * z2 * z, w * z2 * z2;
      return r;
    };
    auto res = quad::adaptive(integrand, std::span<const double>(breaks), {1e-300, 2e-14, 40});
    ac = res.value;
    out.quadrature_error = res.error;
    out.log_ac = std::log(m.ac_mass()) + shift + std::log(ac[0]);
    logs.push_back(out.log_ac);
  }
  out.log_total = detail::log_sum_exp(logs);
  for (std::size_t i = 0; i < m.atoms().size(); ++i) {
    const double p = std::exp(out.log_atoms[i] - out.log_total);
    const double z = m.atoms()[i].location;
    double zk = 1.0;
    for (int k = 0; k <= 4; ++k, zk *= z) out.moments[k] += p * zk;
  }
  if (m.density()) {
    const double p = std::exp(out.log_ac - out.log_total);
    for (int k = 0; k <= 4; ++k) {
      out.ac_moments[k] = ac[k] / ac[0];
      out.moments[k] += p * out.ac_moments[k];
    }
  }
  return out;
}

inline MomentSummary moments(const Measure1D& m) {
  const auto ti = tilted_integrals(m, 0.0, 0.0);
  MomentSummary s;
  s.sigma2 = ti.moments[2] - ti.moments[1] * ti.moments[1];
  s.mu4 = ti.moments[4];
  s.mass_at_zero = m.mass_at_zero();
  for (const auto& at : m.atoms()) s.abs_mean += at.mass * std::abs(at.location);
  if (const auto& f = m.density()) {
    const double R = f->support_radius();
    auto res = quad::adaptive([&](double z) { return std::abs(z) * f->pdf(z); }, -R, R);
    s.abs_mean += m.ac_mass() * res.value;
    // 2A int_R^inf z^4 e^{-v z^2} dz = A v^{-5/2} Gamma(5/2, v R^2)
    const double v = f->domination_v();
    s.tail_bound = m.ac_mass() * f->domination_A() * std::pow(v, -2.5) * boost::math::tgamma(2.5, v * R * R);
  }
  if (!(s.sigma2 > 0.0)) throw validation_error("degenerate measure: variance is zero");
  return s;
}

/// Numerical witness that e^{v0 z^2} is rho-integrable.
inline double integrability_witness_value(const Measure1D& m) {
  return std::exp(tilted_integrals(m, 0.0, m.v0()).log_total);
}

/// Density of (Z1 + Z2, Z1^2 + Z2^2) for Z1, Z2 i.i.d. with density f.
inline double convolution_density_f2(const Density& f, double x, double y) {
  const double disc = 2.0 * y - x * x;
  if (!(disc > 0.0)) return 0.0;
  const double r = std::sqrt(disc);
  return f.pdf(0.5 * (x + r)) * f.pdf(0.5 * (x - r)) / r;
}

/// The exponential tilt e^{uz+vz^2} rho(dz) / e^{L(u,v)} as a sampler.
class TiltedMeasure {
 public:
  TiltedMeasure(const Measure1D& base, double u, double v) : base_(&base), u_(u), v_(v) {
    const auto ti = tilted_integrals(base, u, v);
    if (!std::isfinite(ti.log_total)) throw domain_fault("tilt outside the Laplace domain");
    double acc = 0.0;
    for (double la : ti.log_atoms) {
      const double p = std::exp(la - ti.log_total);
      atom_mass_.push_back(p);
      cumulative_.push_back(acc += p);
    }
    discrete_ = acc;
    if (const auto& f = base.density()) {
      const double gap = f->domination_v() - v;
      env_sd_ = 1.0 / std::sqrt(2.0 * gap);
      env_mean_ = u * env_sd_ * env_sd_;
      // ln of the normalising constant of f e^{uz+vz^2}
      log_ac_norm_ = ti.log_ac - std::log(base.ac_mass());
      ac_fraction_ = std::exp(ti.log_ac - ti.log_total);
    }
  }

  double u() const noexcept { return u_; }
  double v() const noexcept { return v_; }
  const Measure1D& base() const noexcept { return *base_; }
  const std::vector<double>& atom_masses() const noexcept { return atom_mass_; }
  double ac_fraction() const noexcept { return ac_fraction_; }

  /// Tilted density of the absolutely continuous part (normalised to 1).
  double ac_pdf(double z) const {
    const double lp = base_->density()->log_pdf(z);
    return lp > -kInf ? std::exp(lp + u_ * z + v_ * z * z - log_ac_norm_) : 0.0;
  }

  double draw(Rng& rng) const {
    const auto& atoms = base_->atoms();
    if (!atoms.empty()) {
      const double p = rng.uniform();
      if (p < discrete_ || !base_->density()) {
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), p);
        if (it == cumulative_.end()) --it;
        return atoms[static_cast<std::size_t>(it - cumulative_.begin())].location;
      }
    }
    const Density& f = *base_->density();
    boost::random::normal_distribution<double> normal;
    if (f.kind() == Density::Kind::gaussian) {
      const double prec = 1.0 / (f.scale() * f.scale()) - 2.0 * v_;
      const double sd = 1.0 / std::sqrt(prec);
      return u_ * sd * sd + sd * normal(rng);
    }
    for (;;) {
      const double z = env_mean_ + env_sd_ * normal(rng);
      const double ratio = f.pdf(z) / (f.domination_A() * std::exp(-f.domination_v() * z * z));
      if (rng.uniform() < ratio) return z;
    }
  }

 private:
  const Measure1D* base_;
  double u_;
  double v_;
  std::vector<double> atom_mass_;
  std::vector<double> cumulative_;
  double discrete_ = 0.0;
  double env_sd_ = 1.0;
  double env_mean_ = 0.0;
  double log_ac_norm_ = 0.0;
  double ac_fraction_ = 0.0;
};

}  // namespace cwsoc
