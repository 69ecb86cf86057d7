#pragma once

// Measure specifications (JSON), batches (CSV) and reports (JSON).
//
// Measure schema:
//   {"atoms": [[location, mass], ...],
//    "density": {"kind": "gaussian", "scale": s, "weight": a}
//             | {"kind": "table", "z": [...], "pdf": [...], "weight": a}
//             | {"kind": "expr", "expr": "exp(-z^2/2)", "weight": a},
//    "domination": [A, v],        // required for table and expr
//    "support_radius": R}         // optional; required for expr

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "cwsoc/cramer.hpp"
#include "cwsoc/errors.hpp"
#include "cwsoc/kernel.hpp"
#include "cwsoc/limitlaw.hpp"
#include "cwsoc/measure.hpp"
#include "cwsoc/model.hpp"

namespace cwsoc::io {

using json = nlohmann::json;

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw validation_error("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parses JSON text, reporting syntax errors with line and column.
inline json parse_json(const std::string& text, const std::string& origin = "input") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw validation_error(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

namespace detail {

template <class T>
T field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw validation_error(ctx + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw validation_error(ctx + ": \"" + key + "\" has the wrong type");
  }
}

}  // namespace detail

inline Measure1D measure_from_json(const json& j) {
  if (!j.is_object()) throw validation_error("measure: expected a JSON object");
  std::vector<Atom> atoms;
  if (j.contains("atoms")) {
    for (const auto& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw validation_error("measure: each atom must be [location, mass]");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
  }
  std::optional<Density> density;
  std::optional<double> weight;
  if (j.contains("density") && !j.at("density").is_null()) {
    const auto& d = j.at("density");
    const auto kind = detail::field<std::string>(d, "kind", "density");
    if (d.contains("weight")) weight = detail::field<double>(d, "weight", "density");
    double A = 0.0, v = 0.0;
    const bool has_dom = j.contains("domination");
    if (has_dom) {
      const auto dom = detail::field<std::vector<double>>(j, "domination", "measure");
      if (dom.size() != 2) throw validation_error("measure: domination must be [A, v]");
      A = dom[0];
      v = dom[1];
    }
    if (kind == "gaussian") {
      density = Density::gaussian(d.contains("scale") ? detail::field<double>(d, "scale", "density") : 1.0);
      if (has_dom) density->set_domination(A, v);
    } else if (kind == "table") {
      if (!has_dom) throw validation_error("measure: table density needs \"domination\": [A, v]");
      density = Density::table(detail::field<std::vector<double>>(d, "z", "density"),
                               detail::field<std::vector<double>>(d, "pdf", "density"), A, v);
    } else if (kind == "expr") {
      if (!has_dom) throw validation_error("measure: expr density needs \"domination\": [A, v]");
      if (!j.contains("support_radius")) throw validation_error("measure: expr density needs \"support_radius\"");
      density = Density::expression(detail::field<std::string>(d, "expr", "density"), A, v,
                                    detail::field<double>(j, "support_radius", "measure"));
    } else {
      throw validation_error("measure: unknown density kind '" + kind + "'");
    }
    if (j.contains("support_radius") && kind != "expr")
      density->set_support_radius(detail::field<double>(j, "support_radius", "measure"));
  }
  return Measure1D(std::move(atoms), std::move(density), weight);
}

inline Measure1D load_measure(const std::string& path) { return measure_from_json(parse_json(read_file(path), path)); }

inline json measure_to_json(const Measure1D& m) {
  json j;
  j["atoms"] = json::array();
  for (const auto& a : m.atoms()) j["atoms"].push_back({a.location, a.mass});
  if (const auto& f = m.density()) {
    json d;
    d["weight"] = m.ac_mass();
    switch (f->kind()) {
      case Density::Kind::gaussian:
        d["kind"] = "gaussian";
        d["scale"] = f->scale();
        break;
      case Density::Kind::table:
        d["kind"] = "table";
        d["z"] = f->table_nodes();
        d["pdf"] = f->table_values();
        break;
      case Density::Kind::expr:
        d["kind"] = "expr";
        d["expr"] = f->expression_source();
        break;
    }
    j["density"] = d;
    j["domination"] = {f->domination_A(), f->domination_v()};
    j["support_radius"] = f->support_radius();
  }
  return j;
}

// ---- batches ------------------------------------------------------------------

inline void write_batch_csv(std::ostream& out, const EmpiricalBatch& b) {
  out << "S,T,weight\n";
  for (const auto& s : b.samples)
    out << format_double(s.S) << ',' << format_double(s.T) << ',' << format_double(s.weight) << '\n';
}

inline std::vector<Sample> read_batch_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw validation_error("batch CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "S,T,weight") throw validation_error("batch CSV: header must be S,T,weight");
  std::vector<Sample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw validation_error("batch CSV line " + std::to_string(lineno) + ": expected 3 fields");
    try {
      const std::string_view v(line);
      out.push_back({parse_double(v.substr(0, c1)), parse_double(v.substr(c1 + 1, c2 - c1 - 1)),
                     parse_double(v.substr(c2 + 1))});
    } catch (const validation_error& e) {
      throw validation_error("batch CSV line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!(out.back().weight >= 0.0)) throw validation_error("batch CSV line " + std::to_string(lineno) + ": negative weight");
  }
  return out;
}

// ---- reports ------------------------------------------------------------------

inline json to_json(const Diagnostics& d, Method m) {
  json j;
  switch (m) {
    case Method::enumeration:
      j["log_Z"] = d.log_Z;
      j["states_enumerated"] = d.states_enumerated;
      j["states_dropped"] = d.states_dropped;
      break;
    case Method::importance:
      j["effective_sample_size"] = d.effective_sample_size;
      j["ess_floor"] = d.ess_floor;
      j["low_ess"] = d.low_ess;
      j["zero_T_draws"] = d.zero_T_draws;
      break;
    case Method::metropolis:
      j["acceptance_rate"] = d.acceptance_rate;
      j["integrated_autocorrelation_time"] = d.integrated_autocorrelation_time;
      j["effective_sample_size"] = d.effective_sample_size;
      j["burn_in_sweeps"] = d.burn_in_sweeps;
      j["thin_sweeps"] = d.thin_sweeps;
      j["chains"] = d.chains;
      break;
  }
  return j;
}

inline json to_json(const CramerReport& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["alpha"] = r.alpha;
  j["radius"] = r.radius;
  j["step"] = r.step;
  j["margin"] = r.margin;
  j["sup_estimate"] = r.sup_estimate;
  j["sup_bound"] = r.sup_bound ? json(*r.sup_bound) : json(nullptr);
  j["lipschitz_padding"] = r.lipschitz_padding;
  j["witness"] = r.witness ? json{r.witness->first, r.witness->second} : json(nullptr);
  if (r.lattice) j["lattice"] = {{"offset", r.lattice->offset}, {"spacing", r.lattice->spacing}};
  else j["lattice"] = nullptr;
  if (r.mixture)
    j["mixture"] = {{"bound", r.mixture->bound},       {"eta", r.mixture->eta},
                    {"eta_estimate", r.mixture->eta_estimate}, {"padding", r.mixture->padding},
                    {"quadrature_error", r.mixture->quadrature_error}};
  else j["mixture"] = nullptr;
  j["reason"] = r.reason;
  return j;
}

inline json to_json(const VerificationReport& r) {
  json j;
  j["test_id"] = r.test_id;
  j["n"] = r.n;
  j["method"] = r.method;
  j["passed"] = r.passed;
  j["tolerance"] = r.tolerance;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["ks_distance"] = opt(r.ks_distance);
  j["moments"] = json::array();
  for (const auto& m : r.moments)
    j["moments"].push_back(
        {{"order", m.order}, {"empirical", m.empirical}, {"limit", m.limit}, {"relative_error", m.relative_error}});
  if (r.rescaling_factor != 0.0) j["rescaling_factor"] = r.rescaling_factor;
  j["mean_x"] = opt(r.mean_x);
  j["se_x"] = opt(r.se_x);
  j["mean_y"] = opt(r.mean_y);
  j["se_y"] = opt(r.se_y);
  j["target_y"] = opt(r.target_y);
  if (!r.tail_ladder.empty()) {
    j["tail_ladder"] = json::array();
    for (auto [n, p] : r.tail_ladder) j["tail_ladder"].push_back({{"n", n}, {"probability", p}});
    j["tail_decreasing"] = r.tail_decreasing.value_or(false);
  }
  j["cramer_condition"] = r.cramer;
  j["effective_sample_size"] = opt(r.effective_sample_size);
  j["notes"] = r.notes;
  return j;
}

}  // namespace cwsoc::io
