#include <gtest/gtest.h>

#include <cmath>

#include "cwsoc/transforms.hpp"
#include "oracles.hpp"

using namespace cwsoc;

namespace {

const RateFunction<LogLaplace>& gaussian_rate() {
  static const RateFunction<LogLaplace> R{LogLaplace(Measure1D::standard_gaussian())};
  return R;
}

}  // namespace

TEST(LogLaplace, GaussianExamples) {
  const LogLaplace L(Measure1D::standard_gaussian());
  EXPECT_NEAR(log_laplace(L, 0, 0), 0.0, 1e-13);
  EXPECT_NEAR(log_laplace(L, 1, 0), 0.5, 1e-12);
  EXPECT_NEAR(log_laplace(L, 0, 0.25), 0.34657359027997264, 1e-12);
  EXPECT_EQ(log_laplace(L, 0, 0.5), kInf);
  EXPECT_EQ(log_laplace(L, 0, 0.7), kInf);
  for (double u : {-2.0, -0.3, 0.8})
    for (double v : {-3.0, -0.1, 0.2, 0.45}) EXPECT_NEAR(log_laplace(L, u, v), oracle::gaussian_L(u, v), 1e-11);
}

TEST(LogLaplace, SymmetricInU) {
  const LogLaplace L(Measure1D::rho0());
  for (double u : {0.1, 0.7, 2.5})
    for (double v : {-1.0, 0.0, 0.3}) EXPECT_NEAR(log_laplace(L, u, v), log_laplace(L, -u, v), 1e-10);
}

TEST(LogLaplace, GradientAndHessianExamples) {
  const LogLaplace G(Measure1D::standard_gaussian());
  const auto e = log_laplace_grad_hess(G, 0, 0);
  EXPECT_NEAR(e.gradient[0], 0.0, 1e-12);
  EXPECT_NEAR(e.gradient[1], 1.0, 1e-12);
  EXPECT_NEAR(e.hessian(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(e.hessian(0, 1), 0.0, 1e-10);
  EXPECT_NEAR(e.hessian(1, 1), 2.0, 1e-10);

  const LogLaplace R(Measure1D::rademacher());
  const auto r = log_laplace_grad_hess(R, 0, 0);
  EXPECT_EQ(r.gradient[1], 1.0);
  EXPECT_NEAR(r.hessian(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(r.hessian(1, 1), 0.0, 1e-15);
  EXPECT_TRUE(R.square_is_degenerate());

  const LogLaplace Z(Measure1D::rho0());
  EXPECT_NEAR(log_laplace_grad_hess(Z, 0, 0.2).gradient[0], 0.0, 1e-14);
  EXPECT_THROW(log_laplace_grad_hess(G, 0, 0.6), domain_fault);
}

TEST(LogLaplace, GradientMatchesFiniteDifferences) {
  const LogLaplace L(Measure1D::rho0());
  const double h = 1e-5;
  for (auto [u, v] : {std::pair{0.3, 0.1}, {-1.2, -0.4}, {0.0, 0.3}, {2.0, 0.0}}) {
    const auto e = log_laplace_grad_hess(L, u, v);
    const double gu = (log_laplace(L, u + h, v) - log_laplace(L, u - h, v)) / (2 * h);
    const double gv = (log_laplace(L, u, v + h) - log_laplace(L, u, v - h)) / (2 * h);
    EXPECT_NEAR(e.gradient[0], gu, 1e-6 * (1 + std::abs(gu)));
    EXPECT_NEAR(e.gradient[1], gv, 1e-6 * (1 + std::abs(gv)));
  }
}

TEST(RateFunction, GaussianExamples) {
  const auto& R = gaussian_rate();
  const auto a = cramer_transform(R, 0, 1);
  ASSERT_TRUE(a.converged);
  EXPECT_NEAR(a.value, 0.0, 1e-12);
  EXPECT_NEAR(a.argmax.norm(), 0.0, 1e-10);
  EXPECT_NEAR(cramer_transform(R, 0, 2).value, 0.5 * (1 - std::log(2.0)), 1e-10);
  EXPECT_NEAR(cramer_transform(R, 0.5, 1.25).value, 0.125, 1e-10);
}

TEST(RateFunction, MatchesClosedFormAndBruteForce) {
  const auto& R = gaussian_rate();
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      const double x = -0.25 + 0.025 * i;
      const double y = 0.75 + 0.025 * j;
      const auto r = cramer_transform(R, x, y);
      ASSERT_TRUE(r.converged) << x << "," << y;
      const double bf = oracle::brute_force_sup(oracle::gaussian_L, x, y);
      EXPECT_NEAR(r.value, oracle::gaussian_I(x, y), 1e-9);
      EXPECT_NEAR(r.value, bf, 1e-6);
    }
}

TEST(RateFunction, FenchelInequalityAndRoundTrip) {
  const RateFunction<LogLaplace> R{LogLaplace(Measure1D::rho0())};
  const auto& L = R.source();
  for (auto [x, y] : {std::pair{0.0, 0.25}, {0.1, 0.2}, {-0.2, 0.5}, {0.05, 0.1}}) {
    const auto r = cramer_transform(R, x, y);
    ASSERT_TRUE(r.converged);
    EXPECT_GE(r.value, 0.0);
    const auto e = log_laplace_grad_hess(L, r.argmax[0], r.argmax[1]);
    EXPECT_NEAR(e.gradient[0], x, 1e-8);
    EXPECT_NEAR(e.gradient[1], y, 1e-8);
    const Mat<2> id = r.hess_I * e.hessian;
    EXPECT_LT((id - Mat<2>::Identity()).cwiseAbs().maxCoeff(), 1e-7);
    for (double u : {-1.0, 0.0, 0.5})
      for (double v : {-2.0, 0.0, 0.4}) EXPECT_GE(r.value + log_laplace(L, u, v), u * x + v * y - 1e-9);
  }
  EXPECT_NEAR(cramer_transform(R, 0, 0.25).value, 0.0, 1e-9);
}

TEST(RateFunction, RademacherReducesToBinaryEntropy) {
  const RateFunction<LogLaplace> R{LogLaplace(Measure1D::rademacher())};
  for (double x : {0.0, 0.2, -0.5, 0.9}) {
    const auto r = cramer_transform(R, x, 1.0);
    EXPECT_TRUE(r.degenerate);
    ASSERT_TRUE(r.converged);
    const double expect = x == 0.0 ? 0.0 : 0.5 * ((1 + x) * std::log1p(x) + (1 - x) * std::log1p(-x));
    EXPECT_NEAR(r.value, expect, 1e-10);
  }
  const auto off = cramer_transform(R, 0.0, 0.5);
  EXPECT_FALSE(off.converged);
  EXPECT_EQ(off.value, kInf);
}

TEST(RateFunction, RateAtOrigin) {
  EXPECT_NEAR(rate_at_origin(RateFunction<LogLaplace>{LogLaplace(Measure1D::rho0())}), std::log(4.0 / 3.0), 1e-15);
  EXPECT_EQ(rate_at_origin(RateFunction<LogLaplace>{LogLaplace(Measure1D::rademacher())}), kInf);
  EXPECT_NEAR(rate_at_origin(RateFunction<LogLaplace>{LogLaplace(Measure1D::three_point(0.25))}), std::log(2.0), 1e-15);
}

TEST(RateFunction, AdmissibleDomainProbe) {
  const auto& R = gaussian_rate();
  const auto in = admissible_domain_probe(R, Vec<2>(0, 1));
  EXPECT_TRUE(in.inside);
  EXPECT_EQ(in.expected, std::optional<bool>(true));
  const auto edge = admissible_domain_probe(R, Vec<2>(1, 1));
  EXPECT_FALSE(edge.inside);
  EXPECT_EQ(edge.expected, std::optional<bool>(false));
  EXPECT_TRUE(admissible_domain_probe(R, Vec<2>(0, 0.01)).inside);
}

TEST(RateFunction, OneDimensionalGaussian) {
  const RateFunction<LogLaplace1D> J{LogLaplace1D(Measure1D::standard_gaussian())};
  for (double x : {-0.4, 0.0, 0.3}) {
    const auto r = J.solve(Vec<1>(x));
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 0.5 * x * x, 1e-12);
    EXPECT_NEAR(r.hess_I(0, 0), 1.0, 1e-10);
  }
}

TEST(RateExpansion, ResidualNearMinimum) {
  const auto& R = gaussian_rate();
  const auto q = Interaction::quadratic();
  EXPECT_NEAR(rate_expansion_residual(R, q, 0.05, 1.001), 1.0, 0.05);
  EXPECT_EQ(rate_expansion_residual(R, q, 0.0, 1.0), 1.0);
  const auto star = Interaction::quartic(1.0, Interaction::Variant::star);
  EXPECT_NEAR(rate_expansion_residual(R, star, 0.04, 1.0), 1.0, 0.05);
  EXPECT_THROW(rate_expansion_residual(RateFunction<LogLaplace>{LogLaplace(Measure1D::rademacher())}, q, 0.01, 1.0),
               validation_error);
}

TEST(RateExpansion, ClosedFormDifference) {
  // I - F for Gaussian rho and g = u^2/2 in closed form
  const auto& R = gaussian_rate();
  const auto q = Interaction::quadratic();
  for (auto [x, y] : {std::pair{0.03, 1.0}, {0.0, 1.02}, {0.02, 0.99}}) {
    const double diff = oracle::gaussian_I(x, y) - 0.5 * x * x / y;
    const double form = 3 * std::pow(x, 4) / 12 + (y - 1) * (y - 1) / 4;
    EXPECT_NEAR(rate_expansion_residual(R, q, x, y), diff / form, 1e-5);
  }
}
