#pragma once

// Command-line front end. Exit codes: 0 success, 2 validation error
// (bad flags, malformed input), 3 numeric failure (non-convergence).

#include <openssl/evp.h>

#include <boost/version.hpp>
#include <CLI11.hpp>
#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cwsoc/cwsoc.hpp"

namespace cwsoc::cli {

namespace fs = std::filesystem;
using io::json;

inline constexpr const char* kVersion = "cwsoc 1.0.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline std::string sha256_file(const fs::path& p) { return sha256_hex(io::read_file(p.string())); }

inline json versions() {
  return {{"cwsoc", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION}};
}

/// "quadratic" | "quartic:M4".
inline Interaction parse_interaction(const std::string& spec, const std::string& variant) {
  Interaction::Variant v;
  if (variant == "standard") v = Interaction::Variant::standard;
  else if (variant == "star") v = Interaction::Variant::star;
  else throw validation_error("--variant must be standard or star");
  if (spec == "quadratic") return Interaction::quadratic(v);
  if (spec.rfind("quartic:", 0) == 0) return Interaction::quartic(io::parse_double(spec.substr(8)), v);
  if (spec == "quartic") return Interaction::quartic(1.0, v);
  throw validation_error("--g must be quadratic or quartic:M4");
}

inline Method parse_method(const std::string& s) {
  if (s == "enum") return Method::enumeration;
  if (s == "is") return Method::importance;
  if (s == "mcmc") return Method::metropolis;
  throw validation_error("--method must be enum, is or mcmc");
}

inline EmpiricalBatch simulate(const TiltedModel& m, Method method, std::size_t count, std::uint64_t seed,
                               std::int64_t burn_in = -1, std::uint64_t thin = 1) {
  switch (method) {
    case Method::enumeration: return enumerate_exact(m);
    case Method::importance: return sample_importance(m, count, seed);
    case Method::metropolis: {
      MetropolisSettings s;
      s.count = count;
      s.burn_in_sweeps = burn_in;
      s.thin_sweeps = thin;
      return sample_metropolis(m, s, seed);
    }
  }
  throw validation_error("unknown method");
}

inline json batch_sidecar(const TiltedModel& m, const EmpiricalBatch& b) {
  return {{"n", b.n},
          {"method", to_string(b.method)},
          {"seed", b.seed},
          {"interaction", m.g().describe()},
          {"samples", b.samples.size()},
          {"diagnostics", io::to_json(b.diagnostics, b.method)}};
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw validation_error("cannot write " + p.string());
  out << text;
  if (!out) throw validation_error("write failed: " + p.string());
}

inline std::string batch_csv(const EmpiricalBatch& b) {
  std::ostringstream os;
  io::write_batch_csv(os, b);
  return os.str();
}

inline void write_curve(const fs::path& p, const std::vector<CdfPoint>& curve) {
  std::ostringstream os;
  os << "s,empirical_cdf,limit_cdf\n";
  for (const auto& c : curve)
    os << io::format_double(c.s) << ',' << io::format_double(c.empirical) << ',' << io::format_double(c.limit) << '\n';
  write_text(p, os.str());
}

// ---- report pipeline -------------------------------------------------------------

struct RunConfig {
  fs::path measure;
  std::string g = "quadratic";
  std::string variant = "standard";
  std::vector<int> n_ladder;
  std::string method = "mcmc";
  std::size_t count = 10000;
  std::int64_t burn_in = -1;
  std::uint64_t thin = 1;
  std::vector<std::uint64_t> seeds;
  fs::path output_dir;
  double lln_tol = 0.05;
  double ks_tol = 0.05;
  json raw;
};

inline RunConfig load_run_config(const fs::path& path) {
  RunConfig c;
  c.raw = io::parse_json(io::read_file(path.string()), path.string());
  const json& j = c.raw;
  try {
    c.measure = j.at("measure").get<std::string>();
    if (c.measure.is_relative()) c.measure = path.parent_path() / c.measure;
    if (j.contains("interaction")) {
      const auto& it = j.at("interaction");
      const auto kind = it.value("kind", std::string("quadratic"));
      c.g = kind == "quartic" ? "quartic:" + io::format_double(it.value("m4", 0.0)) : kind;
      c.variant = it.value("variant", std::string("standard"));
    }
    c.n_ladder = j.at("n_ladder").get<std::vector<int>>();
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      c.method = s.value("method", c.method);
      c.count = s.value("count", c.count);
      c.burn_in = s.value("burn_in_sweeps", c.burn_in);
      c.thin = s.value("thin_sweeps", c.thin);
    }
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.output_dir = j.value("output_dir", std::string("runs"));
    c.lln_tol = j.value("lln_tolerance", c.lln_tol);
    c.ks_tol = j.value("ks_tolerance", c.ks_tol);
  } catch (const json::exception& e) {
    throw validation_error(path.string() + ": " + e.what());
  }
  if (!fs::exists(c.measure)) throw validation_error("measure file not found: " + c.measure.string());
  if (c.n_ladder.empty()) throw validation_error("n_ladder must be nonempty");
  for (std::size_t i = 0; i < c.n_ladder.size(); ++i) {
    if (c.n_ladder[i] < 1) throw validation_error("n_ladder entries must be >= 1");
    if (i > 0 && c.n_ladder[i] <= c.n_ladder[i - 1]) throw validation_error("n_ladder must be strictly increasing");
  }
  if (c.seeds.empty()) throw validation_error("seed list must be nonempty");
  parse_method(c.method);
  return c;
}

/// Records config hash, seeds, versions and the digest of every output file.
inline fs::path write_manifest(const RunConfig& c, const fs::path& dir, const std::vector<fs::path>& outputs) {
  json files = json::object();
  for (const auto& p : outputs) files[fs::relative(p, dir).generic_string()] = sha256_file(p);
  json m = {{"config_sha256", sha256_hex(c.raw.dump())},
            {"config", c.raw},
            {"seeds", c.seeds},
            {"versions", versions()},
            {"files", files}};
  const fs::path out = dir / "manifest.json";
  write_text(out, m.dump(2) + "\n");
  return out;
}

inline fs::path run_report(const RunConfig& c, std::ostream& log) {
  const Measure1D rho = io::load_measure(c.measure.string());
  const Interaction g = parse_interaction(c.g, c.variant);
  const Method method = parse_method(c.method);
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec || !fs::is_directory(c.output_dir)) throw validation_error("cannot create " + c.output_dir.string());
  std::vector<fs::path> outputs;
  for (int n : c.n_ladder) {
    const TiltedModel m(rho, g, n);
    for (auto seed : c.seeds) {
      const auto b = simulate(m, method, c.count, seed, c.burn_in, c.thin);
      const std::string stem = "n" + std::to_string(n) + "_seed" + std::to_string(seed);
      const auto csv = c.output_dir / ("batch_" + stem + ".csv");
      write_text(csv, batch_csv(b));
      const auto side = c.output_dir / ("batch_" + stem + ".json");
      write_text(side, batch_sidecar(m, b).dump(2) + "\n");
      const auto lln = c.output_dir / ("lln_" + stem + ".json");
      write_text(lln, io::to_json(verify_lln(m, b, c.lln_tol)).dump(2) + "\n");
      std::vector<CdfPoint> curve;
      const auto fr = verify_fluctuations(m, b, c.ks_tol, std::nullopt, &curve);
      const auto fl = c.output_dir / ("fluct_" + stem + ".json");
      write_text(fl, io::to_json(fr).dump(2) + "\n");
      const auto cv = c.output_dir / ("cdf_" + stem + ".csv");
      write_curve(cv, curve);
      outputs.insert(outputs.end(), {csv, side, lln, fl, cv});
      log << "n=" << n << " seed=" << seed << " ks=" << *fr.ks_distance << "\n";
    }
  }
  return write_manifest(c, c.output_dir, outputs);
}

// ---- dispatch ------------------------------------------------------------------------

inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Curie-Weiss SOC laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string rho_path;
  auto add_rho = [&](CLI::App* a) { a->add_option("--rho", rho_path, "measure JSON")->required()->check(CLI::ExistingFile); };

  auto* measure = app.add_subcommand("measure", "measure utilities");
  measure->require_subcommand(1);
  auto* m_info = measure->add_subcommand("info", "moments and structure of a measure");
  add_rho(m_info);

  auto* cramer = app.add_subcommand("cramer", "Cramer condition");
  cramer->require_subcommand(1);
  auto* c_check = cramer->add_subcommand("check", "estimate sup |M| over an annulus");
  add_rho(c_check);
  double alpha = 0.5, radius = 50.0, step = 0.05;
  c_check->add_option("--alpha", alpha)->check(CLI::PositiveNumber);
  c_check->add_option("--radius", radius)->check(CLI::PositiveNumber);
  c_check->add_option("--step", step)->check(CLI::PositiveNumber);

  auto* rate = app.add_subcommand("rate", "Cramer transform I(x, y)");
  rate->require_subcommand(1);
  auto* r_eval = rate->add_subcommand("eval", "evaluate I at one point");
  add_rho(r_eval);
  double rx = 0.0, ry = 1.0;
  r_eval->add_option("--x", rx)->required();
  r_eval->add_option("--y", ry)->required();
  auto* r_grid = rate->add_subcommand("grid", "CSV of I over a rectangle");
  add_rho(r_grid);
  double x0 = -0.5, x1 = 0.5, y0 = 0.6, y1 = 2.0;
  int nx = 21, ny = 21;
  r_grid->add_option("--x-min", x0);
  r_grid->add_option("--x-max", x1);
  r_grid->add_option("--y-min", y0);
  r_grid->add_option("--y-max", y1);
  r_grid->add_option("--nx", nx)->check(CLI::PositiveNumber);
  r_grid->add_option("--ny", ny)->check(CLI::PositiveNumber);

  auto* kernel = app.add_subcommand("kernel", "smoothed density against its asymptotic");
  kernel->require_subcommand(1);
  auto* k_verify = kernel->add_subcommand("verify", "CSV x,n,c,phi,se,asymptotic,ratio");
  add_rho(k_verify);
  int dim = 1;
  std::vector<int> kn{50};
  std::vector<double> kx{0.0};
  double kc = 0.0;
  std::size_t ksamples = 100000;
  std::uint64_t kseed = 1;
  k_verify->add_option("--d", dim)->check(CLI::IsMember({1, 2}));
  k_verify->add_option("--n", kn, "one or more n")->expected(1, -1);
  k_verify->add_option("--x", kx, "d=1: points x; d=2: pairs x y")->expected(1, -1);
  k_verify->add_option("--c", kc, "kernel width (default 1/n)");
  k_verify->add_option("--samples", ksamples);
  k_verify->add_option("--seed", kseed);

  auto* sim = app.add_subcommand("simulate", "sample or enumerate the tilted model");
  add_rho(sim);
  std::string gspec = "quadratic", variant = "standard", method = "mcmc", out_path;
  int n = 64;
  std::size_t count = 10000;
  std::uint64_t seed = 1;
  std::int64_t burn = -1;
  std::uint64_t thin = 1;
  sim->add_option("--g", gspec);
  sim->add_option("--variant", variant);
  sim->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  sim->add_option("--method", method);
  sim->add_option("--count", count);
  sim->add_option("--seed", seed);
  sim->add_option("--burn-in", burn, "sweeps (default 10 n)");
  sim->add_option("--thin", thin);
  sim->add_option("--out", out_path, "batch CSV path; diagnostics go next to it as .json");

  auto* verify = app.add_subcommand("verify", "check a batch against the limit theorems");
  verify->require_subcommand(1);
  std::string batch_path, curve_path, vmethod = "is";
  double tol = 0.05;
  std::vector<CLI::App*> vsubs{verify->add_subcommand("lln", "law of large numbers"),
                               verify->add_subcommand("fluct", "quartic fluctuation law")};
  for (auto* v : vsubs) {
    add_rho(v);
    v->add_option("--batch", batch_path)->required()->check(CLI::ExistingFile);
    v->add_option("--g", gspec);
    v->add_option("--variant", variant);
    v->add_option("--n", n)->required()->check(CLI::PositiveNumber);
    v->add_option("--method", vmethod, "method that produced the batch");
    v->add_option("--tol", tol);
  }
  vsubs[1]->add_option("--curve", curve_path, "CSV s,empirical_cdf,limit_cdf");

  auto* report = app.add_subcommand("report", "run a configured pipeline and write a manifest");
  std::string config_path, report_out;
  report->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "override output_dir");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*m_info) {
      const auto rho = io::load_measure(rho_path);
      const auto s = moments(rho);
      json j = {{"sigma2", s.sigma2},
                {"mu4", s.mu4},
                {"mass_at_zero", s.mass_at_zero},
                {"ac_mass", rho.ac_mass()},
                {"discrete_mass", rho.discrete_mass()},
                {"symmetry_defect", rho.symmetry_defect()},
                {"v0", rho.v0()},
                {"rate_at_origin", rho.mass_at_zero() > 0 ? json(-std::log(rho.mass_at_zero())) : json("inf")}};
      out << j.dump(2) << "\n";
    } else if (*c_check) {
      if (!(radius > alpha)) throw validation_error("--radius must exceed --alpha");
      const CharEvaluator e(io::load_measure(rho_path));
      out << io::to_json(check_condition(e, alpha, radius, step)).dump(2) << "\n";
    } else if (*r_eval) {
      const RateFunction<LogLaplace> R{LogLaplace(io::load_measure(rho_path))};
      const auto r = cramer_transform(R, rx, ry);
      json j = {{"x", rx},
                {"y", ry},
                {"value", r.value},
                {"argmax", {r.argmax[0], r.argmax[1]}},
                {"hess_I", {{r.hess_I(0, 0), r.hess_I(0, 1)}, {r.hess_I(1, 0), r.hess_I(1, 1)}}},
                {"converged", r.converged},
                {"degenerate", r.degenerate},
                {"iterations", r.iterations},
                {"residual", r.residual},
                {"message", r.message}};
      out << j.dump(2) << "\n";
      if (!r.converged) {
        err << "not in the admissible domain: " << r.message << "\n";
        return 3;
      }
    } else if (*r_grid) {
      const RateFunction<LogLaplace> R{LogLaplace(io::load_measure(rho_path))};
      out << "x,y,I,u*,v*,det_hess_I\n";
      for (int i = 0; i < nx; ++i) {
        const double x = nx == 1 ? x0 : x0 + (x1 - x0) * i / (nx - 1);
        for (int k = 0; k < ny; ++k) {
          const double y = ny == 1 ? y0 : y0 + (y1 - y0) * k / (ny - 1);
          const auto r = cramer_transform(R, x, y);
          auto f = [&](double v) { return r.converged ? io::format_double(v) : std::string("nan"); };
          out << io::format_double(x) << ',' << io::format_double(y) << ',' << f(r.value) << ',' << f(r.argmax[0])
              << ',' << f(r.argmax[1]) << ',' << f(r.hess_I.determinant()) << '\n';
        }
      }
    } else if (*k_verify) {
      const auto rho = io::load_measure(rho_path);
      if (dim == 1) {
        out << "x,n,c,phi,se,asymptotic,ratio\n";
        for (int nn : kn) {
          const double c = kc > 0 ? kc : 1.0 / nn;
          for (const auto& row : theorem3_comparison(rho, nn, c, kx))
            out << io::format_double(row.x[0]) << ',' << nn << ',' << io::format_double(c) << ','
                << io::format_double(row.phi) << ',' << io::format_double(row.se) << ','
                << io::format_double(row.asymptotic) << ',' << io::format_double(row.ratio) << '\n';
        }
      } else {
        if (kx.size() % 2 != 0) throw validation_error("--x for d=2 takes pairs x y");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < kx.size(); i += 2) pts.emplace_back(kx[i], kx[i + 1]);
        const auto verdict = check_condition(CharEvaluator(rho), 0.5, 20.0, 0.1).verdict;
        out << "x,y,n,c,phi,se,asymptotic,ratio,ratio_se\n";
        for (int nn : kn) {
          const double c = kc > 0 ? kc : 1.0 / nn;
          Phi2DSettings st;
          st.samples = ksamples;
          st.seed = kseed;
          const SmoothedDensity2D sd(rho, nn, c, st);
          for (const auto& row : theorem3_comparison(sd, pts, verdict))
            out << io::format_double(row.x[0]) << ',' << io::format_double(row.x[1]) << ',' << nn << ','
                << io::format_double(c) << ',' << io::format_double(row.phi) << ',' << io::format_double(row.se) << ','
                << io::format_double(row.asymptotic) << ',' << io::format_double(row.ratio) << ','
                << io::format_double(row.ratio_se) << '\n';
        }
      }
    } else if (*sim) {
      const TiltedModel m(io::load_measure(rho_path), parse_interaction(gspec, variant), n);
      const auto b = simulate(m, parse_method(method), count, seed, burn, thin);
      const auto side = batch_sidecar(m, b).dump(2) + "\n";
      if (out_path.empty()) {
        io::write_batch_csv(out, b);
        err << side;
      } else {
        write_text(out_path, batch_csv(b));
        write_text(fs::path(out_path).replace_extension(".json"), side);
      }
    } else if (*vsubs[0] || *vsubs[1]) {
      const TiltedModel m(io::load_measure(rho_path), parse_interaction(gspec, variant), n);
      std::ifstream in(batch_path);
      EmpiricalBatch b;
      b.samples = io::read_batch_csv(in);
      b.n = n;
      b.method = parse_method(vmethod);
      std::vector<double> w;
      for (const auto& s : b.samples) w.push_back(s.weight);
      b.diagnostics.chains = 1;
      if (b.method == Method::importance) b.diagnostics.effective_sample_size = stats::effective_sample_size(w);
      if (b.method == Method::metropolis) {
        std::vector<double> S;
        for (const auto& s : b.samples) S.push_back(s.S);
        b.diagnostics.effective_sample_size = S.size() / stats::integrated_autocorrelation_time(S);
      }
      if (*vsubs[0]) {
        out << io::to_json(verify_lln(m, b, tol)).dump(2) << "\n";
      } else {
        std::vector<CdfPoint> curve;
        const auto r = verify_fluctuations(m, b, tol, std::nullopt, &curve);
        out << io::to_json(r).dump(2) << "\n";
        if (!curve_path.empty()) write_curve(curve_path, curve);
      }
    } else if (*report) {
      auto cfg = load_run_config(config_path);
      if (!report_out.empty()) cfg.output_dir = report_out;
      const auto manifest = run_report(cfg, err);
      out << manifest.string() << "\n";
    }
  } catch (const validation_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const domain_fault& e) {
    err << "domain error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace cwsoc::cli
