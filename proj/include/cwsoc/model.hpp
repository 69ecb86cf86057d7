#pragma once

// The SOC Curie-Weiss measure: density exp(n F_g(S/n, T/n)) 1{T > 0} / Z
// with respect to rho^{(x)n}, realised by exact enumeration over atom
// counts, self-normalised importance sampling and single-site Metropolis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "cwsoc/errors.hpp"
#include "cwsoc/interaction.hpp"
#include "cwsoc/measure.hpp"
#include "cwsoc/parallel.hpp"
#include "cwsoc/rng.hpp"
#include "cwsoc/stats.hpp"

#if defined(__GNUC__) || defined(__clang__)
#define CWSOC_FLATTEN __attribute__((flatten))
#else
#define CWSOC_FLATTEN
#endif

namespace cwsoc {

class TiltedModel {
 public:
  TiltedModel(Measure1D rho, Interaction g, int n) : rho_(std::move(rho)), g_(std::move(g)), n_(n) {
    if (n < 1) throw validation_error("n must be >= 1");
    g_.validate();
  }

  const Measure1D& rho() const noexcept { return rho_; }
  const Interaction& g() const noexcept { return g_; }
  int n() const noexcept { return n_; }

  /// n F_g(S/n, T/n); -inf when T = 0.
  double log_weight(double S, double T) const {
    if (!(T > 0.0)) return -std::numeric_limits<double>::infinity();
    return g_.log_weight(S, T, n_);
  }

 private:
  Measure1D rho_;
  Interaction g_;
  int n_;
};

struct Sample {
  double S = 0.0;
  double T = 0.0;
  double weight = 1.0;
};

enum class Method { enumeration, importance, metropolis };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::enumeration: return "enumeration";
    case Method::importance: return "importance";
    case Method::metropolis: return "metropolis";
  }
  return "?";
}

struct Diagnostics {
  // enumeration
  double log_Z = 0.0;
  std::uint64_t states_enumerated = 0;
  std::uint64_t states_dropped = 0;  ///< T = 0 classes
  // importance
  double effective_sample_size = 0.0;
  double ess_floor = 0.0;
  bool low_ess = false;
  std::uint64_t zero_T_draws = 0;
  // metropolis
  double acceptance_rate = 0.0;
  double integrated_autocorrelation_time = 0.0;  ///< in recorded samples
  std::uint64_t burn_in_sweeps = 0;
  std::uint64_t thin_sweeps = 0;
  unsigned chains = 0;
};

struct EmpiricalBatch {
  std::vector<Sample> samples;
  Method method = Method::enumeration;
  int n = 0;
  Diagnostics diagnostics;
  std::uint64_t seed = 0;
};

// ---- exact enumeration -------------------------------------------------------

namespace detail {

struct LogAccumulator {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add(double x) {
    if (x == -std::numeric_limits<double>::infinity()) return;
    if (x <= max) {
      sum += std::exp(x - max);
    } else {
      sum = sum * std::exp(max - x) + 1.0;
      max = x;
    }
  }
  void merge(const LogAccumulator& o) {
    if (o.sum == 0.0) return;
    if (sum == 0.0) {
      *this = o;
      return;
    }
    if (o.max <= max) {
      sum += o.sum * std::exp(o.max - max);
    } else {
      sum = sum * std::exp(max - o.max) + o.sum;
      max = o.max;
    }
  }
  double log() const { return sum > 0.0 ? max + std::log(sum) : -std::numeric_limits<double>::infinity(); }
};

struct StateView {
  double S;
  double T;
  double log_prior;  ///< ln of the multinomial probability under rho^{(x)n}
  double log_mass;   ///< log_prior + n F_g, -inf when T = 0
};

}  // namespace detail

/// Number of atom-count classes, C(n + k - 1, k - 1), saturating.
inline std::uint64_t state_count(int n, std::size_t atoms) {
  long double c = 1.0L;
  for (std::size_t j = 1; j < atoms; ++j) c = c * static_cast<long double>(n + j) / static_cast<long double>(j);
  return c > 1.8e19L ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(c + 0.5L);
}

/// Calls make() once per value of the first atom's count in [lo, hi) and
/// visit(acc, state) for every count class with that first count. Returns the
/// accumulators in order of the first count; hi < 0 means n + 1.
template <class Acc, class Make, class Visit>
std::vector<Acc> reduce_states(const TiltedModel& m, Make&& make, Visit&& visit, std::size_t lo = 0,
                               std::ptrdiff_t hi = -1) {
  if (!m.rho().is_atomic()) throw validation_error("exact enumeration needs a purely atomic rho");
  const auto& atoms = m.rho().atoms();
  const int n = m.n();
  const std::size_t k = atoms.size();
  std::vector<double> lfact(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) lfact[static_cast<std::size_t>(i)] = std::lgamma(i + 1.0);
  std::vector<double> lmass(k);
  for (std::size_t i = 0; i < k; ++i) lmass[i] = std::log(atoms[i].mass);

  const std::size_t end = hi < 0 ? static_cast<std::size_t>(n) + 1 : static_cast<std::size_t>(hi);
  return parallel_chunks<Acc>(end - lo, [&](std::size_t rel) -> Acc {
    const std::size_t c1 = lo + rel;
    Acc acc = make();
    const int first = static_cast<int>(c1);
    const double z0 = atoms[0].location;
    if (k == 1 && first != n) return acc;
    const double S0 = first * z0, T0 = first * z0 * z0;
    const double L0 = lfact[static_cast<std::size_t>(n)] - lfact[c1] + first * lmass[0];
    auto rec = [&](auto&& self, std::size_t idx, int remaining, double S, double T, double lp) -> void {
      const double z = atoms[idx].location;
      if (idx + 1 == k) {
        const double S1 = S + remaining * z, T1 = T + remaining * z * z;
        const double lp1 = lp - lfact[static_cast<std::size_t>(remaining)] + remaining * lmass[idx];
        visit(acc, detail::StateView{S1, T1, lp1, lp1 + m.log_weight(S1, T1)});
        return;
      }
      for (int c = 0; c <= remaining; ++c)
        self(self, idx + 1, remaining - c, S + c * z, T + c * z * z,
             lp - lfact[static_cast<std::size_t>(c)] + c * lmass[idx]);
    };
    if (k == 1)
      visit(acc, detail::StateView{S0, T0, L0 - lfact[0], L0 + m.log_weight(S0, T0)});
    else
      rec(rec, 1, n - first, S0, T0, L0);
    return acc;
  });
}

/// reduce_states in waves of first counts, merging each wave into one
/// accumulator so that at most a wave of partial results is alive.
template <class Acc, class Make, class Visit, class Merge>
Acc fold_states(const TiltedModel& m, Make&& make, Visit&& visit, Merge&& merge) {
  const std::size_t total = static_cast<std::size_t>(m.n()) + 1;
  const std::size_t wave = 64 * std::max(1u, worker_count());
  Acc all = make();
  for (std::size_t lo = 0; lo < total; lo += wave) {
    const auto hi = static_cast<std::ptrdiff_t>(std::min(total, lo + wave));
    for (auto& p : reduce_states<Acc>(m, make, visit, lo, hi)) merge(all, p);
  }
  return all;
}

/// ln Z_{n,g} = ln E[e^{n F_g} 1{T > 0}] under rho^{(x)n}.
inline double log_partition(const TiltedModel& m) {
  auto parts = reduce_states<detail::LogAccumulator>(
      m, [] { return detail::LogAccumulator{}; },
      [](detail::LogAccumulator& a, const detail::StateView& s) { a.add(s.log_mass); });
  detail::LogAccumulator all;
  for (const auto& p : parts) all.merge(p);
  return all.log();
}

/// ln of E[e^{n F_g} 1{T > 0} 1{pred(S/n, T/n)}] under rho^{(x)n}.
template <class Pred>
double log_restricted_mass(const TiltedModel& m, Pred&& pred) {
  auto parts = reduce_states<detail::LogAccumulator>(
      m, [] { return detail::LogAccumulator{}; },
      [&](detail::LogAccumulator& a, const detail::StateView& s) {
        if (pred(s.S / m.n(), s.T / m.n())) a.add(s.log_mass);
      });
  detail::LogAccumulator all;
  for (const auto& p : parts) all.merge(p);
  return all.log();
}

/// Exact probability under the tilted law of {pred(S/n, T/n)}.
template <class Pred>
double exact_probability(const TiltedModel& m, Pred&& pred) {
  return std::exp(log_restricted_mass(m, std::forward<Pred>(pred)) - log_partition(m));
}

/// (1/n) ln int_{Delta* cap A} e^{n F_g} d nu~_{n,rho} with A given by pred(x, y).
template <class Pred>
double varadhan_functional(const TiltedModel& m, Pred&& pred) {
  return log_restricted_mass(m, std::forward<Pred>(pred)) / m.n();
}

/// Exact law of S under the tilted measure, sorted by S, values within
/// 1e-9 (1 + |S|) merged.
inline std::vector<std::pair<double, double>> exact_law_S(const TiltedModel& m) {
  using Map = std::map<double, detail::LogAccumulator>;
  const Map all = fold_states<Map>(
      m, [] { return Map{}; },
      [](Map& acc, const detail::StateView& s) {
        if (s.log_mass > -std::numeric_limits<double>::infinity()) acc[s.S].add(s.log_mass);
      },
      [](Map& into, const Map& part) {
        for (const auto& [S, a] : part) into[S].merge(a);
      });
  detail::LogAccumulator total;
  for (const auto& [S, a] : all) total.merge(a);
  const double lz = total.log();
  std::vector<std::pair<double, double>> out;
  for (const auto& [S, a] : all) {
    const double p = std::exp(a.log() - lz);
    if (!out.empty() && std::abs(out.back().first - S) <= 1e-9 * (1.0 + std::abs(S)))
      out.back().second += p;
    else
      out.emplace_back(S, p);
  }
  return out;
}

/// Exact law of (S, T) as a normalised batch.
inline EmpiricalBatch enumerate_exact(const TiltedModel& m, std::uint64_t budget = 5000000) {
  if (!m.rho().is_atomic()) throw validation_error("exact enumeration needs a purely atomic rho");
  const auto states = state_count(m.n(), m.rho().atoms().size());
  if (states > budget)
    throw validation_error("enumeration budget exceeded: " + std::to_string(states) + " count classes > " +
                           std::to_string(budget));
  struct Part {
    std::vector<std::pair<Sample, double>> kept;  // sample, log mass
    std::uint64_t dropped = 0;
  };
  auto parts = reduce_states<Part>(
      m, [] { return Part{}; },
      [](Part& p, const detail::StateView& s) {
        if (!(s.T > 0.0)) {
          ++p.dropped;
          return;
        }
        p.kept.push_back({Sample{s.S, s.T, 0.0}, s.log_mass});
      });
  EmpiricalBatch b;
  b.method = Method::enumeration;
  b.n = m.n();
  b.diagnostics.states_enumerated = states;
  detail::LogAccumulator total;
  for (const auto& p : parts) {
    b.diagnostics.states_dropped += p.dropped;
    for (const auto& [s, lm] : p.kept) total.add(lm);
  }
  b.diagnostics.log_Z = total.log();
  for (const auto& p : parts)
    for (const auto& [s, lm] : p.kept) b.samples.push_back({s.S, s.T, std::exp(lm - b.diagnostics.log_Z)});
  return b;
}

// ---- importance sampling ---------------------------------------------------

/// Proposal rho^{(x)n}, weight e^{n F_g} 1{T > 0} (stored divided by the
/// largest weight in the batch). Draws with T = 0 are counted, not kept.
inline EmpiricalBatch sample_importance(const TiltedModel& m, std::size_t count, std::uint64_t seed,
                                        double ess_floor = 100.0) {
  if (count < 1) throw validation_error("count must be >= 1");
  const int n = m.n();
  const double cap = 0.5 * n * (1.0 + 1e-12) + 1e-12;
  constexpr std::size_t chunk = 4096;
  struct Part {
    std::vector<Sample> kept;
    std::uint64_t zero_T = 0;
  };
  const std::size_t chunks = (count + chunk - 1) / chunk;
  auto parts = parallel_chunks<Part>(chunks, [&](std::size_t c) {
    Rng rng(seed, c);
    Part p;
    const std::size_t lo = c * chunk, hi = std::min(count, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      double S = 0.0, T = 0.0;
      for (int j = 0; j < n; ++j) {
        const double z = m.rho().draw(rng);
        S += z;
        T += z * z;
      }
      if (!(T > 0.0)) {
        ++p.zero_T;
        continue;
      }
      const double lw = m.log_weight(S, T);
      if (lw > cap) throw numeric_error("importance weight exceeds the e^{n/2} bound");
      p.kept.push_back({S, T, lw});
    }
    return p;
  });
  EmpiricalBatch b;
  b.method = Method::importance;
  b.n = n;
  b.seed = seed;
  double top = -std::numeric_limits<double>::infinity();
  for (auto& p : parts) {
    b.diagnostics.zero_T_draws += p.zero_T;
    for (const auto& s : p.kept) top = std::max(top, s.weight);
    b.samples.insert(b.samples.end(), p.kept.begin(), p.kept.end());
  }
  std::vector<double> w;
  w.reserve(b.samples.size());
  for (auto& s : b.samples) w.push_back(s.weight = std::exp(s.weight - top));
  b.diagnostics.effective_sample_size = stats::effective_sample_size(w);
  b.diagnostics.ess_floor = ess_floor;
  b.diagnostics.low_ess = b.diagnostics.effective_sample_size < ess_floor;
  return b;
}

// ---- Metropolis -------------------------------------------------------------

/// Single-site Metropolis: resample one uniformly chosen coordinate from rho,
/// accept with min(1, e^{n [F_g(new) - F_g(old)]}); moves to T = 0 rejected.
class MetropolisChain {
 public:
  MetropolisChain(const TiltedModel& m, std::uint64_t seed, std::uint64_t stream)
      : model_(&m), rng_(seed, stream), x_(static_cast<std::size_t>(m.n())) {
    do {
      for (auto& xi : x_) xi = m.rho().draw(rng_);
      resum();
    } while (nonzero_ == 0);
  }

  double S() const noexcept { return S_; }
  double T() const noexcept { return T_; }
  std::uint64_t proposals() const noexcept { return proposals_; }
  std::uint64_t accepted() const noexcept { return accepted_; }
  const std::vector<double>& state() const noexcept { return x_; }

  void sweep(std::uint64_t sweeps = 1) {
    const Measure1D& rho = model_->rho();
    const Interaction& g = model_->g();
    const bool gaussian = rho.atoms().empty() && rho.density()->kind() == Density::Kind::gaussian;
    const bool quadratic = g.kind() == Interaction::Kind::quadratic && g.variant() == Interaction::Variant::standard;
    auto exact_weight = [this](double S, double T) { return model_->log_weight(S, T); };
    auto quadratic_weight = [](double S, double T) { return 0.5 * S * S / T; };
    auto generic_draw = [&rho](Rng& r) { return rho.draw(r); };
    if (gaussian) {
      boost::random::normal_distribution<double> normal(0.0, rho.density()->scale());
      auto gaussian_draw = [&normal](Rng& r) { return normal(r); };
      if (quadratic)
        run<false>(sweeps, gaussian_draw, quadratic_weight);
      else
        run<false>(sweeps, gaussian_draw, exact_weight);
    } else if (quadratic) {
      run<true>(sweeps, generic_draw, quadratic_weight);
    } else {
      run<true>(sweeps, generic_draw, exact_weight);
    }
  }

  /// Acceptance probability of the move a -> b (log form: min(0, lw(b) - lw(a))).
  static double acceptance(const TiltedModel& m, double Sa, double Ta, double Sb, double Tb) {
    if (!(Tb > 0.0)) return 0.0;
    return std::min(1.0, std::exp(m.log_weight(Sb, Tb) - m.log_weight(Sa, Ta)));
  }

 private:
  // Branch-free accept: the exp is only evaluated when
  // 1 + d <= U < 1 + d + d^2/2 (d < 0), which is rare.
  template <bool TrackZero, class Draw, class Weight>
  CWSOC_FLATTEN void run(std::uint64_t sweeps, Draw&& draw, Weight&& weight) {
    const auto n = static_cast<std::uint64_t>(x_.size());
    double* x = x_.data();
    Rng rng = rng_;
    std::uint64_t acc = 0;
    for (std::uint64_t s = 0; s < sweeps; ++s) {
      double S = S_, T = T_, lw = lw_;
      long nonzero = nonzero_;
      for (std::uint64_t k = 0; k < n; ++k) {
        const std::size_t i = static_cast<std::size_t>(rng.below(n));
        const double old = x[i];
        const double z = draw(rng);
        const double u = rng.uniform();
        long nz = 1;
        if constexpr (TrackZero) nz = nonzero - (old != 0.0) + (z != 0.0);
        const double S1 = S - old + z, T1 = T - old * old + z * z;
        const double lw1 = weight(S1, T1);
        const double d = lw1 - lw;
        bool a = (d >= 0.0) | (u < 1.0 + d);
        if (!a & (u < 1.0 + d + 0.5 * d * d)) [[unlikely]]
          a = u < std::exp(d);
        if constexpr (TrackZero) {
          a = a & (nz != 0);
          nonzero = a ? nz : nonzero;
        }
        x[i] = a ? z : old;
        S = a ? S1 : S;
        T = a ? T1 : T;
        lw = a ? lw1 : lw;
        acc += a;
      }
      resum();
    }
    rng_ = rng;
    proposals_ += sweeps * n;
    accepted_ += acc;
  }

  void resum() {
    S_ = T_ = 0.0;
    nonzero_ = 0;
    for (double xi : x_) {
      S_ += xi;
      T_ += xi * xi;
      nonzero_ += xi != 0.0;
    }
    lw_ = model_->log_weight(S_, T_);
  }

  const TiltedModel* model_;
  Rng rng_;
  std::vector<double> x_;
  double S_ = 0.0, T_ = 0.0, lw_ = 0.0;
  long nonzero_ = 0;
  std::uint64_t proposals_ = 0, accepted_ = 0;
};

struct MetropolisSettings {
  std::size_t count = 10000;         ///< recorded samples in total
  std::int64_t burn_in_sweeps = -1;  ///< -1: 10 n
  std::uint64_t thin_sweeps = 1;
  unsigned chains = 1;
  /// When positive, keep extending until count / tau_int >= this (per total).
  double target_ess = 0.0;
  std::size_t max_count = 50000000;
};

inline EmpiricalBatch sample_metropolis(const TiltedModel& m, const MetropolisSettings& cfg, std::uint64_t seed) {
  if (cfg.count < 1 || cfg.chains < 1 || cfg.thin_sweeps < 1) throw validation_error("metropolis: bad settings");
  const std::uint64_t burn =
      cfg.burn_in_sweeps < 0 ? 10ULL * static_cast<std::uint64_t>(m.n()) : static_cast<std::uint64_t>(cfg.burn_in_sweeps);
  struct ChainOut {
    std::vector<Sample> samples;
    double tau = 1.0;
    std::uint64_t proposals = 0, accepted = 0;
  };
  const std::size_t per_chain = (cfg.count + cfg.chains - 1) / cfg.chains;
  const std::size_t per_chain_max = std::max(per_chain, cfg.max_count / cfg.chains);
  const double per_chain_ess = cfg.target_ess / cfg.chains;
  auto outs = parallel_chunks<ChainOut>(cfg.chains, [&](std::size_t c) {
    MetropolisChain chain(m, seed, c);
    chain.sweep(burn);
    ChainOut out;
    std::vector<double> trace;
    std::size_t want = per_chain;
    for (;;) {
      while (out.samples.size() < want) {
        chain.sweep(cfg.thin_sweeps);
        out.samples.push_back({chain.S(), chain.T(), 1.0});
        trace.push_back(chain.S());
      }
      out.tau = stats::integrated_autocorrelation_time(trace);
      if (per_chain_ess <= 0.0 || out.samples.size() / out.tau >= per_chain_ess || want >= per_chain_max) break;
      const double need = per_chain_ess * out.tau * 1.03;
      want = std::min(per_chain_max, std::max(want + want / 16, static_cast<std::size_t>(need)));
    }
    out.proposals = chain.proposals();
    out.accepted = chain.accepted();
    return out;
  });
  EmpiricalBatch b;
  b.method = Method::metropolis;
  b.n = m.n();
  b.seed = seed;
  auto& d = b.diagnostics;
  d.burn_in_sweeps = burn;
  d.thin_sweeps = cfg.thin_sweeps;
  d.chains = cfg.chains;
  std::uint64_t prop = 0, acc = 0;
  double ess = 0.0;
  for (auto& o : outs) {
    ess += o.samples.size() / o.tau;
    prop += o.proposals;
    acc += o.accepted;
    b.samples.insert(b.samples.end(), o.samples.begin(), o.samples.end());
  }
  d.acceptance_rate = prop ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0;
  d.effective_sample_size = ess;
  d.integrated_autocorrelation_time = ess > 0.0 ? b.samples.size() / ess : 1.0;
  return b;
}

/// Metropolis for n > 64, importance sampling otherwise.
inline Method default_method(const TiltedModel& m) { return m.n() > 64 ? Method::metropolis : Method::importance; }

// ---- derived quantities ---------------------------------------------------------

/// E_n(u) / E_n(0): self-normalised mean of e^{i u S / n^{3/4}}.
inline std::complex<double> char_integral_En(const TiltedModel& m, double u, const EmpiricalBatch& b) {
  if (b.n != m.n()) throw validation_error("batch was produced for a different n");
  const double scale = u / std::pow(static_cast<double>(m.n()), 0.75);
  double re = 0.0, im = 0.0, tot = 0.0;
  for (const auto& s : b.samples) {
    re += s.weight * std::cos(scale * s.S);
    im += s.weight * std::sin(scale * s.S);
    tot += s.weight;
  }
  if (!(tot > 0.0)) throw validation_error("batch has zero total weight");
  return {re / tot, im / tot};
}

/// Factor (mu4 + m4 sigma^4)^{1/4} / sigma^2 (sigma^6 for the star variant).
inline double rescaling_factor(const TiltedModel& m) {
  const auto s = moments(m.rho());
  return std::pow(m.g().fluctuation_constant(s.sigma2, s.mu4), 0.25) / s.sigma2;
}

/// (value, weight) pairs of the rescaled statistic factor * S / n^{3/4}.
inline std::vector<std::pair<double, double>> rescaled_statistic(const TiltedModel& m, const EmpiricalBatch& b) {
  if (b.n != m.n()) throw validation_error("batch was produced for a different n");
  const double f = rescaling_factor(m) / std::pow(static_cast<double>(m.n()), 0.75);
  std::vector<std::pair<double, double>> out;
  out.reserve(b.samples.size());
  for (const auto& s : b.samples) out.emplace_back(f * s.S, s.weight);
  return out;
}

/// Law of S from enumerate_exact, sorted and merged.
inline std::vector<std::pair<double, double>> law_of_S(const EmpiricalBatch& b) {
  std::map<double, double> acc;
  for (const auto& s : b.samples) acc[s.S] += s.weight;
  double tot = 0.0;
  for (auto& [S, w] : acc) tot += w;
  std::vector<std::pair<double, double>> out;
  for (auto& [S, w] : acc) out.emplace_back(S, w / tot);
  return out;
}

}  // namespace cwsoc
