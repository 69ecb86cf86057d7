#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cwsoc/errors.hpp"

namespace cwsoc {

/// The interaction function g with g(u) ~ u^2/2 near 0 and g <= u^2/2,
/// and the functional it induces on (x, y) = (S/n, T/n).
class Interaction {
 public:
  enum class Kind { quadratic, quartic, custom };
  /// standard: F_g(x, y) = g(x / sqrt(y)); star: F*_g(x, y) = g(x) / y.
  enum class Variant { standard, star };

  static Interaction quadratic(Variant variant = Variant::standard) { return Interaction(Kind::quadratic, 0.0, variant); }

  /// g(u) = u^2/2 - m4 u^4 / 12.
  static Interaction quartic(double m4, Variant variant = Variant::standard) {
    if (!(m4 >= 0.0)) throw validation_error("quartic interaction: m4 must be >= 0");
    return Interaction(Kind::quartic, m4, variant);
  }

  /// Arbitrary g. With the standard variant it is only evaluated on [-1, 1].
  static Interaction custom(std::function<double(double)> g, Variant variant = Variant::standard,
                            std::string label = "custom") {
    Interaction it(Kind::custom, 0.0, variant);
    it.custom_ = std::move(g);
    it.label_ = std::move(label);
    it.m4_ = it.fd_m4();
    return it;
  }

  Kind kind() const noexcept { return kind_; }
  Variant variant() const noexcept { return variant_; }
  double m4() const noexcept { return m4_; }
  const std::string& label() const noexcept { return label_; }

  double g(double u) const {
    switch (kind_) {
      case Kind::quadratic: return 0.5 * u * u;
      case Kind::quartic: {
        const double u2 = u * u;
        return 0.5 * u2 - m4_ * u2 * u2 / 12.0;
      }
      case Kind::custom: return custom_(u);
    }
    return 0.0;
  }

  /// F_g(x, y) (or F*_g under the star variant), y > 0.
  double F(double x, double y) const {
    return variant_ == Variant::standard ? g(x / std::sqrt(y)) : g(x) / y;
  }

  /// n F_g(S/n, T/n) for T > 0: the log-weight of a configuration.
  double log_weight(double S, double T, double n) const {
    if (variant_ == Variant::standard) {
      switch (kind_) {
        case Kind::quadratic: return 0.5 * S * S / T;
        case Kind::quartic: {
          const double u2 = S * S / (n * T);
          return n * (0.5 * u2 - m4_ * u2 * u2 / 12.0);
        }
        case Kind::custom: return n * custom_(S / std::sqrt(n * T));
      }
    }
    return n * n * g(S / n) / T;
  }

  /// Constant in the fluctuation scaling: mu4 + m4 sigma^4 (star: sigma^6).
  double fluctuation_constant(double sigma2, double mu4) const {
    const double p = variant_ == Variant::standard ? sigma2 * sigma2 : sigma2 * sigma2 * sigma2;
    return mu4 + m4_ * p;
  }

  /// Finite-difference estimate of -g''''(0)/2 (5-point stencil).
  double fd_m4(double h = 1e-2) const {
    const double d4 = (g(-2 * h) - 4 * g(-h) + 6 * g(0) - 4 * g(h) + g(2 * h)) / (h * h * h * h);
    return -0.5 * d4;
  }

  /// Finite-difference estimate of g'''(0).
  double fd_third(double h = 1e-2) const {
    return (g(2 * h) - 2 * g(h) + 2 * g(-h) - g(-2 * h)) / (2 * h * h * h);
  }

  /// Checks the structural hypotheses on g; returns a list of violations.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    for (int i = -2000; i <= 2000; ++i) {
      const double u = i / 2000.0;
      if (g(u) > 0.5 * u * u) {
        out.push_back("g(u) > u^2/2 at u = " + std::to_string(u));
        break;
      }
    }
    for (int k = 2; k <= 5; ++k) {
      const double u = std::pow(10.0, -k);
      if (std::abs(g(u) / (u * u) - 0.5) > 0.5e-3) out.push_back("g(u)/u^2 does not tend to 1/2");
    }
    const double m4 = fd_m4();
    if (m4 < -1e-4) out.push_back("m4 = -g''''(0)/2 is negative");
    if (kind_ != Kind::custom && std::abs(m4 - m4_) > 1e-4) out.push_back("declared m4 disagrees with finite differences");
    if (std::abs(fd_third()) > 1e-4) out.push_back("g'''(0) != 0");
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (!v.empty()) throw validation_error("interaction: " + v.front());
  }

  std::string describe() const {
    std::string s;
    switch (kind_) {
      case Kind::quadratic: s = "quadratic"; break;
      case Kind::quartic: s = "quartic:" + std::to_string(m4_); break;
      case Kind::custom: s = label_; break;
    }
    return s + (variant_ == Variant::star ? "/star" : "/standard");
  }

 private:
  Interaction(Kind kind, double m4, Variant variant) : kind_(kind), variant_(variant), m4_(m4) {}

  Kind kind_;
  Variant variant_;
  double m4_ = 0.0;
  std::function<double(double)> custom_;
  std::string label_;
};

}  // namespace cwsoc
