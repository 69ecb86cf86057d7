#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cwsoc/measure.hpp"
#include "oracles.hpp"

using namespace cwsoc;

TEST(Measure, GaussianMomentsMatchGaussHermite) {
  const auto s = moments(Measure1D::standard_gaussian());
  const double m2 = oracle::gaussian_expectation([](double z) { return z * z; });
  const double m4 = oracle::gaussian_expectation([](double z) { return z * z * z * z; });
  EXPECT_NEAR(s.sigma2, m2, 1e-10);
  EXPECT_NEAR(s.mu4, m4, 1e-10);
  EXPECT_NEAR(s.sigma2, 1.0, 1e-10);
  EXPECT_NEAR(s.mu4, 3.0, 1e-10);
  EXPECT_EQ(s.mass_at_zero, 0.0);
}

TEST(Measure, AtomicMomentsAreExact) {
  const auto r = moments(Measure1D::rademacher());
  EXPECT_EQ(r.sigma2, 1.0);
  EXPECT_EQ(r.mu4, 1.0);
  EXPECT_EQ(r.mass_at_zero, 0.0);
  const auto t = moments(Measure1D::three_point(0.25));
  EXPECT_NEAR(t.sigma2, 0.5, 1e-14);
  EXPECT_NEAR(t.mu4, 0.5, 1e-14);
  EXPECT_NEAR(t.mass_at_zero, 0.5, 1e-14);
}

TEST(Measure, Rho0Composition) {
  const auto m = Measure1D::rho0();
  const auto s = moments(m);
  EXPECT_NEAR(s.sigma2, 0.25, 1e-10);
  EXPECT_NEAR(s.mass_at_zero, 0.75, 1e-15);
  EXPECT_NEAR(s.mu4, 1.0 / 8 + 3.0 / 8, 1e-10);
  EXPECT_GE(s.mu4, s.sigma2 * s.sigma2);
}

TEST(Measure, RejectsInvalidInputs) {
  EXPECT_THROW(moments(Measure1D({{0.0, 1.0}}, std::nullopt)), validation_error);
  EXPECT_THROW(Measure1D({{1.0, 0.6}, {-1.0, 0.6}}, std::nullopt), validation_error);
  EXPECT_THROW(Measure1D({{1.0, 0.5}, {1.0, 0.5}}, std::nullopt), validation_error);
  EXPECT_THROW(Measure1D({{1.0, -0.5}, {-1.0, 1.5}}, std::nullopt), validation_error);
  EXPECT_THROW(Measure1D({{1.0, 0.25}, {-1.0, 0.25}}, Density::gaussian(), 0.6), validation_error);
  // asymmetric measures are representable but fail validation
  const Measure1D skew({{1.0, 0.7}, {-1.0, 0.3}}, std::nullopt);
  EXPECT_GT(skew.symmetry_defect(), 0.1);
  EXPECT_THROW(skew.require_symmetric(), validation_error);
  EXPECT_NO_THROW(Measure1D::rho0().require_symmetric());
}

TEST(Measure, SamplingDiracAndMoments) {
  const Measure1D dirac({{0.0, 1.0}}, std::nullopt);
  for (double x : dirac.sample(5, 3)) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(dirac.sample(0, 3), validation_error);

  const auto r = Measure1D::rademacher().sample(1000000, 11);
  double mean = 0.0;
  for (double x : r) mean += x;
  EXPECT_LT(std::abs(mean / r.size()), 4.0 / 1000.0);

  const auto z = Measure1D::rho0().sample(1000000, 12);
  double zeros = 0.0;
  for (double x : z) zeros += x == 0.0;
  EXPECT_NEAR(zeros / z.size(), 0.75, 0.002);
}

TEST(Measure, SamplingIsDeterministicPerSeed) {
  const auto m = Measure1D::rho0();
  EXPECT_EQ(m.sample(100, 5), m.sample(100, 5));
  EXPECT_NE(m.sample(100, 5), m.sample(100, 6));
}

TEST(Measure, RejectionSamplerMatchesMoments) {
  const Measure1D m({}, Density::expression("exp(-z^4/4)", 1.0, 0.25, 6.0));
  const auto s = moments(m);
  const auto xs = m.sample(400000, 21);
  double m2 = 0.0;
  for (double x : xs) m2 += x * x;
  m2 /= xs.size();
  const double sd = std::sqrt((s.mu4 - s.sigma2 * s.sigma2) / xs.size());
  EXPECT_LT(std::abs(m2 - s.sigma2), 5 * sd);
  // oracle: Gamma-function moments of exp(-z^4/4)
  const double oracle_m2 = 2.0 * std::tgamma(0.75) / std::tgamma(0.25);
  EXPECT_NEAR(s.sigma2, oracle_m2, 1e-9);
}

TEST(Measure, TableDensityIsNormalised) {
  std::vector<double> z, p;
  for (int i = -40; i <= 40; ++i) {
    z.push_back(i * 0.1);
    p.push_back(std::max(0.0, 4.0 - std::abs(i * 0.1)));
  }
  const Measure1D m({}, Density::table(z, p, 0.5, 0.01));
  const auto s = moments(m);
  // triangle on [-4, 4]: variance 16/6
  EXPECT_NEAR(s.sigma2, 16.0 / 6.0, 1e-9);
  EXPECT_NEAR(m.density()->pdf(0.0), 0.25, 1e-12);
}

TEST(Measure, ConvolutionDensityF2Examples) {
  const Density f = Density::gaussian();
  EXPECT_EQ(convolution_density_f2(f, 2.0, 1.0), 0.0);
  EXPECT_EQ(convolution_density_f2(f, 1.0, 0.5), 0.0);
  const double phi = std::exp(-0.25) / std::sqrt(2 * std::numbers::pi);
  EXPECT_NEAR(convolution_density_f2(f, 0.0, 1.0), phi * phi / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(convolution_density_f2(f, 0.0, 1.0), 0.06826, 1e-5);
}

TEST(Measure, ConvolutionDensityF2IntegratesToOne) {
  // substitute y = (x^2 + r^2)/2, dy = r dr
  const Density f = Density::gaussian();
  // Gauss-Legendre in r keeps away from r = 0, where 2y - x^2 cancels to nothing
  const double total = oracle::gauss_legendre_panels(
      [&](double x) {
        return oracle::gauss_legendre_panels(
            [&](double r) { return convolution_density_f2(f, x, 0.5 * (x * x + r * r)) * r; }, 0, 12, 30);
      },
      -12, 12, 30);
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Measure, ConvolutionDensityF2MatchesMonteCarlo) {
  const Density f = Density::gaussian();
  Rng rng(99);
  boost::random::normal_distribution<double> nd;
  const double h = 0.1;
  std::size_t hits = 0;
  const std::size_t N = 2000000;
  for (std::size_t i = 0; i < N; ++i) {
    const double a = nd(rng), b = nd(rng);
    if (std::abs(a + b) < h / 2 && std::abs(a * a + b * b - 1.0) < h / 2) ++hits;
  }
  const double est = hits / (N * h * h);
  const double se = std::sqrt(static_cast<double>(hits)) / (N * h * h);
  EXPECT_LT(std::abs(est - convolution_density_f2(f, 0.0, 1.0)), 4 * se + 0.002);
}

TEST(Measure, LogLaplaceIntegrals) {
  const auto g = Measure1D::standard_gaussian();
  EXPECT_NEAR(tilted_integrals(g, 0.0, 0.0).log_total, 0.0, 1e-13);
  EXPECT_NEAR(tilted_integrals(g, 1.0, 0.0).log_total, 0.5, 1e-12);
  EXPECT_NEAR(tilted_integrals(g, 0.0, 0.25).log_total, -0.5 * std::log(0.5), 1e-12);
  EXPECT_NEAR(tilted_integrals(g, 1.3, -0.7).log_total, oracle::gaussian_L(1.3, -0.7), 1e-12);
  EXPECT_EQ(tilted_integrals(g, 0.0, 0.5).log_total, kInf);
  EXPECT_TRUE(std::isfinite(tilted_integrals(Measure1D::rademacher(), 3.0, 40.0).log_total));
}

TEST(Measure, IntegrabilityWitness) {
  const auto m = Measure1D::rho0();
  EXPECT_GT(m.v0(), 0.0);
  EXPECT_TRUE(std::isfinite(integrability_witness_value(m)));
  EXPECT_LE(m.density()->domination_defect(), 1.0 + 1e-12);
}

TEST(Measure, TiltedSamplerMatchesTiltedMean) {
  const auto m = Measure1D::rho0();
  const TiltedMeasure mu(m, 0.4, 0.1);
  const auto ti = tilted_integrals(m, 0.4, 0.1);
  Rng rng(4);
  double acc = 0.0;
  const int N = 400000;
  for (int i = 0; i < N; ++i) acc += mu.draw(rng);
  const double var = ti.moments[2] - ti.moments[1] * ti.moments[1];
  EXPECT_LT(std::abs(acc / N - ti.moments[1]), 5 * std::sqrt(var / N));
}

TEST(Expression, ParsesAndReportsColumns) {
  Expression e("2*z^2 + sin(pi*z) - exp(-z)/3");
  EXPECT_NEAR(e(0.5), 2 * 0.25 + 1.0 - std::exp(-0.5) / 3, 1e-15);
  EXPECT_NEAR(Expression("-z^2")(3.0), -9.0, 0);
  try {
    Expression bad("exp(z) + foo(z)");
    FAIL();
  } catch (const validation_error& err) {
    EXPECT_NE(std::string(err.what()).find("column 10"), std::string::npos) << err.what();
  }
  EXPECT_THROW(Expression("(z"), validation_error);
  EXPECT_THROW(Expression("z )"), validation_error);
}
