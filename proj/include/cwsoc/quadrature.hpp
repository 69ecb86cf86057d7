#pragma once

// Gauss-Legendre panel quadrature, generic over the integrand's value type
// (double, std::complex<double>, fixed-size Eigen arrays).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <boost/math/quadrature/gauss.hpp>

namespace cwsoc::quad {

/// Full node/weight table of the N-point Gauss-Legendre rule on [-1, 1].
template <unsigned N>
struct LegendreRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  static const LegendreRule& get() {
    static const LegendreRule rule = [] {
      LegendreRule r;
      using G = boost::math::quadrature::gauss<double, N>;
      const auto& x = G::abscissa();
      const auto& w = G::weights();
      std::size_t k = 0;
      // boost stores the non-negative half; index 0 is the centre for odd N.
      for (std::size_t i = x.size(); i-- > 0;) {
        if (x[i] == 0.0) continue;
        r.nodes[k] = -x[i];
        r.weights[k] = w[i];
        ++k;
      }
      if (N % 2 == 1) {
        r.nodes[k] = 0.0;
        r.weights[k] = w[0];
        ++k;
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) continue;
        r.nodes[k] = x[i];
        r.weights[k] = w[i];
        ++k;
      }
      return r;
    }();
    return rule;
  }
};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }
template <class Derived>
double magnitude(const Eigen::ArrayBase<Derived>& v) {
  return v.abs().maxCoeff();
}

template <class T>
T zero_like(const T& sample) {
  if constexpr (std::is_arithmetic_v<T>) {
    return T{0};
  } else if constexpr (std::is_same_v<T, std::complex<double>>) {
    return T{0.0, 0.0};
  } else {
    T z = sample;
    z.setZero();
    return z;
  }
}

/// Fixed N-point rule on one panel [a, b].
template <unsigned N, class F>
auto fixed(F&& f, double a, double b) {
  const auto& rule = LegendreRule<N>::get();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  using T = std::decay_t<decltype(f(mid))>;
  T acc = f(mid + half * rule.nodes[0]) * rule.weights[0];
  for (unsigned i = 1; i < N; ++i) acc += f(mid + half * rule.nodes[i]) * rule.weights[i];
  return T(acc * half);
}

/// Fixed rule over consecutive panels delimited by sorted breakpoints.
template <unsigned N, class F>
auto fixed_panels(F&& f, std::span<const double> breaks) {
  auto acc = fixed<N>(f, breaks[0], breaks[1]);
  for (std::size_t i = 2; i < breaks.size(); ++i) acc += fixed<N>(f, breaks[i - 1], breaks[i]);
  return acc;
}

struct Tolerance {
  double absolute = 1e-13;
  double relative = 1e-13;
  int max_depth = 40;
  std::size_t max_panels = 20000;
};

template <class T>
struct Result {
  T value;
  double error = 0.0;
  bool converged = true;
  std::size_t panels = 0;
};

namespace detail {

template <class F, class T>
void refine(F& f, double a, double b, const T& whole, double eps, int depth, std::size_t budget, Result<T>& out) {
  const double mid = 0.5 * (a + b);
  const T left = fixed<15>(f, a, mid);
  const T right = fixed<15>(f, mid, b);
  const T halves = left + right;
  const double diff = magnitude(T(halves - whole));
  // differences at rounding level of the panel itself cannot shrink further
  const double floor = 64 * std::numeric_limits<double>::epsilon() * magnitude(halves);
  ++out.panels;
  if (diff <= std::max(eps, floor) || depth <= 0 || out.panels >= budget || (b - a) < 1e-14 * (1.0 + std::abs(a))) {
    out.value = out.value + halves;
    out.error += diff;
    if (diff > eps) out.converged = false;
    return;
  }
  refine(f, a, mid, left, 0.5 * eps, depth - 1, budget, out);
  refine(f, mid, b, right, 0.5 * eps, depth - 1, budget, out);
}

}  // namespace detail

/// Adaptive bisection with a 15-point Gauss-Legendre rule on each panel,
/// accepted when the panel and its two halves agree. The initial breakpoints
/// let the caller pin panel edges at kinks or peaks.
template <class F>
auto adaptive(F&& f, std::span<const double> breaks, const Tolerance& tol = {}) {
  using T = std::decay_t<decltype(f(0.0))>;
  std::vector<T> coarse;
  coarse.reserve(breaks.size());
  double scale = 0.0;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    coarse.push_back(fixed<15>(f, breaks[i - 1], breaks[i]));
    scale += magnitude(coarse.back());
  }
  const double eps_total = std::max(tol.absolute, tol.relative * scale);
  const double span_total = breaks.back() - breaks.front();
  Result<T> out{zero_like(coarse.front()), 0.0, true};
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    const double width = breaks[i] - breaks[i - 1];
    if (width <= 0.0) continue;
    detail::refine(f, breaks[i - 1], breaks[i], coarse[i - 1], eps_total * width / span_total, tol.max_depth,
                   tol.max_panels, out);
  }
  return out;
}

template <class F>
auto adaptive(F&& f, double a, double b, const Tolerance& tol = {}) {
  const std::array<double, 2> breaks{a, b};
  return adaptive(std::forward<F>(f), std::span<const double>(breaks), tol);
}

/// Sorts, clips to [lo, hi] and de-duplicates candidate breakpoints.
inline std::vector<double> make_breaks(std::vector<double> pts, double lo, double hi) {
  pts.push_back(lo);
  pts.push_back(hi);
  for (auto& p : pts) p = std::clamp(p, lo, hi);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(), [](double x, double y) { return std::abs(x - y) <= 1e-15 * (1 + std::abs(x)); }),
            pts.end());
  return pts;
}

}  // namespace cwsoc::quad
