// Walks through the main objects for a Gaussian rho: the rate function near
// its minimum, the Cramer condition, and the rescaled fluctuations of a
// short Metropolis run.

#include <iostream>

#include "cwsoc/cwsoc.hpp"

int main() {
  using namespace cwsoc;
  const Measure1D rho = Measure1D::standard_gaussian();
  const auto s = moments(rho);
  std::cout << "sigma^2 = " << s.sigma2 << ", mu4 = " << s.mu4 << "\n";

  const RateFunction<LogLaplace> R{LogLaplace(rho)};
  for (double y : {0.8, 1.0, 1.5}) {
    const auto r = cramer_transform(R, 0.2, y);
    std::cout << "I(0.2, " << y << ") = " << r.value << "  (I - F at this point: " << r.value - 0.02 / y << ")\n";
  }

  const auto rep = check_condition(CharEvaluator(rho), 0.5, 20.0, 0.1);
  std::cout << "Cramer condition: " << to_string(rep.verdict) << " (sup estimate " << rep.sup_estimate << ")\n";

  const TiltedModel m(rho, Interaction::quadratic(), 256);
  MetropolisSettings cfg;
  cfg.count = 20000;
  const auto batch = sample_metropolis(m, cfg, 7);
  const auto fr = verify_fluctuations(m, batch, 0.1);
  std::cout << "n = 256: acceptance " << batch.diagnostics.acceptance_rate << ", ESS "
            << batch.diagnostics.effective_sample_size << ", KS to the quartic law " << *fr.ks_distance
            << ", fourth moment " << fr.moments[1].empirical << " (limit 3)\n";
}
