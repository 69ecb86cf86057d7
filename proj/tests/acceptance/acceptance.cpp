// Acceptance suite: one PASS/FAIL line per criterion. `--only N` runs one.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "cwsoc/cwsoc.hpp"
#include "oracles.hpp"

using namespace cwsoc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---- 1: Gaussian rate function against its closed form ----------------------------

Outcome c1() {
  const auto t0 = Clock::now();
  const RateFunction<LogLaplace> R{LogLaplace(Measure1D::standard_gaussian())};
  double worst = 0.0;
  bool all_converged = true;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      const double x = -0.5 + 0.05 * i, y = 0.6 + 0.07 * j;
      const auto r = cramer_transform(R, x, y);
      all_converged = all_converged && r.converged;
      worst = std::max(worst, std::abs(r.value - oracle::gaussian_I(x, y)));
    }
  const double elapsed = seconds_since(t0);
  // the closed form itself against brute-force maximisation of ux + vy - L
  double oracle_gap = 0.0;
  for (auto [x, y] : {std::pair{0.0, 1.0}, {0.3, 1.5}, {-0.45, 0.7}, {0.5, 2.0}})
    oracle_gap = std::max(oracle_gap, std::abs(oracle::brute_force_sup(oracle::gaussian_L, x, y) - oracle::gaussian_I(x, y)));
  return {all_converged && worst <= 1e-7 && elapsed < 10.0 && oracle_gap <= 1e-6,
          fmt("max |I - closed form| = %.3e over 441 points (tol 1e-7), %.2f s (limit 10 s), "
              "closed form vs brute force %.1e",
              worst, elapsed, oracle_gap)};
}

// ---- 2: expansion of I - F_g near (0, sigma^2) ----------------------------------------

Outcome c2() {
  const RateFunction<LogLaplace> R{LogLaplace(Measure1D::standard_gaussian())};
  const std::pair<const char*, Interaction> cases[] = {
      {"quadratic", Interaction::quadratic()},
      {"quartic m4=1", Interaction::quartic(1.0)},
      {"star m4=1", Interaction::quartic(1.0, Interaction::Variant::star)}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, g] : cases) {
    double lo = kInf, hi = -kInf;
    for (double r : {0.005, 0.01, 0.02, 0.035, 0.05})
      for (int k = 0; k < 24; ++k) {
        const double th = 2 * std::numbers::pi * k / 24;
        const double v = rate_expansion_residual(R, g, r * std::cos(th), 1.0 + r * std::sin(th));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    ok = ok && lo >= 0.95 && hi <= 1.05;
    detail += fmt("%s: residual in [%.4f, %.4f]; ", name, lo, hi);
  }
  return {ok, detail + "band [0.95, 1.05], 120 points with |(x,y)-(0,1)| <= 0.05"};
}

// ---- 3: Cramer-condition verdicts ------------------------------------------------------

Outcome c3() {
  std::string detail;
  bool ok = true;
  {
    const auto t0 = Clock::now();
    const CharEvaluator e(Measure1D::rademacher());
    const auto r = check_condition(e, 0.5);
    const double dt = seconds_since(t0);
    const bool w = r.witness && std::abs(char_fn(e, r.witness->first, r.witness->second)) >= 1 - 1e-9;
    ok = ok && r.verdict == CramerReport::Verdict::fail && w && dt < 60;
    detail += fmt("Rademacher %s", to_string(r.verdict));
    if (r.witness) detail += fmt(" witness (%.3f, %.3f)", r.witness->first, r.witness->second);
    detail += fmt(" %.1fs; ", dt);
  }
  {
    const auto t0 = Clock::now();
    const auto r = check_condition(CharEvaluator(Measure1D::standard_gaussian()), 0.5);
    const double dt = seconds_since(t0);
    ok = ok && r.verdict == CramerReport::Verdict::pass && dt < 60;
    detail += fmt("Gaussian %s sup %.4f %.1fs; ", to_string(r.verdict), r.sup_estimate, dt);
  }
  {
    const auto t0 = Clock::now();
    const auto r = check_condition(CharEvaluator(Measure1D::rho0()), 0.5);
    const double dt = seconds_since(t0);
    const bool certified = r.mixture && r.sup_bound && *r.sup_bound < 1.0;
    ok = ok && r.verdict == CramerReport::Verdict::pass && certified && dt < 60;
    detail += fmt("rho0 %s", to_string(r.verdict));
    if (r.mixture) detail += fmt(" eta %.4f bound %.6f", r.mixture->eta, r.mixture->bound);
    detail += fmt(" %.1fs", dt);
  }
  return {ok, detail};
}

// ---- 4: Laplace transform of the triangular kernel ----------------------------------

Outcome c4() {
  using cd = std::complex<double>;
  Rng rng(4);
  double worst = 0.0;
  int series = 0;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + (i % 2);
    const double c = 0.02 + 3.0 * rng.uniform();
    std::vector<cd> z(d);
    for (auto& zj : z) {
      // |c z_j| uniform on [0, 5], with a run of tiny arguments
      const double mod = i < 20 ? 1e-4 * rng.uniform() : 5.0 * rng.uniform();
      const double arg = 2 * std::numbers::pi * rng.uniform();
      zj = std::polar(mod / c, arg);
      if (mod < 1e-4) ++series;
    }
    cd direct = 1.0;
    for (const auto& zj : z) {
      auto f = [&](double x) { return std::exp(x * zj) * (1.0 - std::abs(x) / c) / c; };
      direct *= oracle::gauss_legendre_panels(f, -c, 0) + oracle::gauss_legendre_panels(f, 0, c);
    }
    const cd v = kernel_laplace(c, z);
    worst = std::max(worst, std::abs(v - direct) / std::max(1.0, std::abs(direct)));
  }
  return {worst <= 1e-10, fmt("max deviation from quadrature %.2e over 100 cases (%d series-branch factors), tol 1e-10",
                              worst, series)};
}

// ---- 5: smoothed density against its local asymptotic -------------------------------

Outcome c5() {
  const auto g = Measure1D::standard_gaussian();
  std::vector<double> xs;
  for (int k = -4; k <= 4; ++k) xs.push_back(0.1 * k);
  auto worst_at = [&](int n) {
    double w = 0.0;
    for (const auto& r : theorem3_comparison(g, n, 1.0 / n, xs)) w = std::max(w, std::abs(r.ratio - 1.0));
    return w;
  };
  const double w50 = worst_at(50), w200 = worst_at(200);
  const auto t0 = Clock::now();
  const SmoothedDensity2D sd(g, 40, 1.0 / 40, Phi2DSettings{1000000, 20240101, 4096, 100});
  const auto verdict = check_condition(CharEvaluator(g), 0.5).verdict;
  const auto row = theorem3_comparison(sd, {{0.1, 1.05}}, verdict).front();
  const double dt = seconds_since(t0);
  // the 0.15 band must hold with the reported standard error accounted for
  const bool d2 = std::abs(row.ratio - 1.0) + 3 * row.ratio_se <= 0.15 && !row.high_variance;
  return {w50 <= 0.1 && w200 <= 0.05 && d2,
          fmt("d=1: max|ratio-1| %.2e at n=50 (tol 0.1), %.2e at n=200 (tol 0.05); "
              "d=2 n=40 (0.1,1.05): ratio %.4f +- %.4f (need |ratio-1| + 3 se <= 0.15), %.1fs",
              w50, w200, row.ratio, row.ratio_se, dt)};
}

// ---- 6: sampler cross-validation -------------------------------------------------------

std::pair<double, double> batch_means(const std::vector<double>& xs, int batches = 50) {
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  double grand = 0.0;
  for (int b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) acc += xs[i];
    means.push_back(acc / len);
    grand += acc / len;
  }
  grand /= batches;
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  return {grand, std::sqrt(var / (batches - 1) / batches)};
}

std::pair<double, double> weighted_share(const EmpiricalBatch& b, double S) {
  double w = 0.0, wx = 0.0;
  for (const auto& s : b.samples) {
    w += s.weight;
    wx += s.weight * (s.S == S);
  }
  const double p = wx / w;
  double var = 0.0;
  for (const auto& s : b.samples) var += std::pow(s.weight * ((s.S == S) - p), 2);
  return {p, std::sqrt(var) / w};
}

Outcome c6() {
  bool ok = true;
  std::string detail;
  const double e = std::numbers::e;
  {
    const TiltedModel m(Measure1D::rademacher(), Interaction::quadratic(), 2);
    const auto b = enumerate_exact(m);
    const auto law = law_of_S(b);
    const double dz = std::abs(std::exp(b.diagnostics.log_Z) - (e + 1) / 2);
    const double dp = std::abs(law[1].second - 1 / (e + 1));
    ok = ok && dz <= 1e-12 && dp <= 1e-12;
    detail += fmt("n=2 hand values |dZ| %.1e |dP(S=0)| %.1e; ", dz, dp);
  }
  for (int n : {2, 4, 8}) {
    const TiltedModel m(Measure1D::rademacher(), Interaction::quadratic(), n);
    const auto exact = law_of_S(enumerate_exact(m));
    const auto is = sample_importance(m, 1000000, 600 + n);
    MetropolisSettings cfg;
    cfg.count = 400000;
    const auto mh = sample_metropolis(m, cfg, 700 + n);
    double worst = 0.0;
    for (const auto& [S, p] : exact) {
      const auto [pi, se_i] = weighted_share(is, S);
      std::vector<double> ind;
      ind.reserve(mh.samples.size());
      for (const auto& s : mh.samples) ind.push_back(s.S == S);
      const auto [pm, se_m] = batch_means(ind);
      worst = std::max({worst, std::abs(pi - p) / std::max(se_i, 1e-300), std::abs(pm - p) / std::max(se_m, 1e-300)});
    }
    ok = ok && worst <= 3.0;
    detail += fmt("n=%d max z %.2f; ", n, worst);
  }
  return {ok, detail + "(tol 3 combined standard errors)"};
}

// ---- 7: law of large numbers --------------------------------------------------------

Outcome c7() {
  const auto t0 = Clock::now();
  std::vector<double> tails;
  for (int n : {500, 1000, 2000}) {
    const TiltedModel m(Measure1D::three_point(0.25), Interaction::quadratic(), n);
    tails.push_back(exact_probability(m, [](double, double y) { return std::abs(y - 0.5) > 0.05; }));
  }
  const bool dec = tails[1] < tails[0] && tails[2] < tails[1];
  const TiltedModel m(Measure1D::standard_gaussian(), Interaction::quadratic(), 1024);
  MetropolisSettings cfg;
  cfg.count = 20000;
  const auto b = sample_metropolis(m, cfg, 1024);
  const auto r = verify_lln(m, b, 1.0);
  const double zx = std::abs(*r.mean_x) / *r.se_x, zy = std::abs(*r.mean_y - 1.0) / *r.se_y;
  const double dt = seconds_since(t0);
  return {dec && tails[2] <= 1e-3 && zx <= 3 && zy <= 3 && dt < 300,
          fmt("P(|T/n-0.5|>0.05) = %.3e, %.3e, %.3e at n=500,1000,2000 (decreasing, <= 1e-3); "
              "Gaussian n=1024: S/n %.4f (%.2f se), T/n %.5f (%.2f se); %.0fs",
              tails[0], tails[1], tails[2], *r.mean_x, zx, *r.mean_y, zy, dt)};
}

// ---- 8: fluctuations ---------------------------------------------------------------

Outcome c8() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  std::vector<double> ks;
  for (int n : {100, 1000, 10000}) {
    const TiltedModel m(Measure1D::three_point(0.25), Interaction::quadratic(), n);
    ks.push_back(*verify_fluctuations_exact(m, 0.02, "violated").ks_distance);
  }
  const bool a = ks[2] <= 0.02 && ks[1] < ks[0] && ks[2] < ks[1];
  ok = ok && a;
  detail += fmt("(a) three-point KS %.4f, %.4f, %.4f at n=1e2,1e3,1e4 (lattice rho); ", ks[0], ks[1], ks[2]);
  const std::pair<char, Interaction> runs[] = {{'b', Interaction::quadratic()}, {'c', Interaction::quartic(1.0)}};
  for (const auto& [tag, g] : runs) {
    const TiltedModel m(Measure1D::standard_gaussian(), g, 4096);
    MetropolisSettings cfg;
    cfg.count = 200000;
    cfg.target_ess = 1e5;
    const auto b = sample_metropolis(m, cfg, tag == 'b' ? 4096 : 4097);
    const auto r = verify_fluctuations(m, b, 0.05, "satisfied");
    const double m4 = r.moments[1].empirical;
    const bool pass = b.diagnostics.effective_sample_size >= 1e5 && *r.ks_distance <= 0.05 && std::abs(m4 / 3 - 1) <= 0.05;
    ok = ok && pass;
    detail += fmt("(%c) factor %.4f ESS %.0f KS %.4f m4 %.4f; ", tag, r.rescaling_factor,
                  b.diagnostics.effective_sample_size, *r.ks_distance, m4);
  }
  const double dt = seconds_since(t0);
  return {ok && dt < 1800, detail + fmt("%.0fs (limit 1800 s)", dt)};
}

// ---- 9: Varadhan-type decay ---------------------------------------------------------

Outcome c9() {
  std::vector<double> v;
  std::string detail;
  for (int n : {50, 100, 200, 400}) {
    const TiltedModel m(Measure1D::three_point(0.25), Interaction::quadratic(), n);
    v.push_back(varadhan_functional(m, [](double x, double) { return std::abs(x) >= 0.5; }));
    detail += fmt("n=%d %.5f; ", n, v.back());
  }
  bool ok = v[0] < 0;
  for (std::size_t i = 1; i < v.size(); ++i) ok = ok && v[i] < v[i - 1];
  return {ok, detail + "required: negative and strictly decreasing"};
}

// ---- 10: quartic law self-consistency -------------------------------------------------

Outcome c10() {
  const double norm = oracle::gauss_legendre_panels(quartic::pdf, -10, 10, 200);
  const double m4 = quartic::moment(4);
  const double m4q = oracle::gauss_legendre_panels([](double s) { return std::pow(s, 4) * quartic::pdf(s); }, -10, 10, 200);
  const std::size_t N = 10000;
  const double bound = kolmogorov_bound_1pct(N);
  int rejected = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::vector<std::pair<double, double>> pts;
    for (double x : quartic::sample(N, seed)) pts.emplace_back(x, 1.0);
    const double d = ks_distance_quartic(std::move(pts));
    worst = std::max(worst, d);
    rejected += d > bound;
  }
  // at the 1% level about one seed in 100 rejects; 5 or more has probability 0.3%
  const bool ok = std::abs(norm - 1) <= 1e-10 && std::abs(m4 - 3) <= 1e-8 && std::abs(m4q - 3) <= 1e-8 && rejected <= 4;
  return {ok, fmt("|int pdf - 1| %.1e; moment(4) %.12f (quadrature %.12f); %d/100 seeds above the 1%% bound %.4f "
                  "(allowed 4), max KS %.4f",
                  std::abs(norm - 1), m4, m4q, rejected, bound, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  const char* log_path = nullptr;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--log") == 0 && i + 1 < argc) log_path = argv[++i];
  }
  // result lines are also written to --log, since ctest hides the output of passing tests
  std::FILE* log = log_path ? std::fopen(log_path, "w") : nullptr;
  const std::vector<std::function<Outcome()>> criteria{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10};
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "--only takes 1..%zu\n", criteria.size());
    return 2;
  }
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only && static_cast<int>(k) + 1 != only) continue;
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("C%zu %s  %s\n", k + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (log) std::fprintf(log, "C%zu %s  %s\n", k + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    failed += !o.pass;
  }
  if (log) std::fclose(log);
  return failed ? 1 : 0;
}
