#pragma once

// Run configuration, CSV manifold/trajectory files and JSON reports.
// CSV floats carry 17 significant digits; JSON numbers use the shortest
// representation that round-trips. Every file is written to a temporary
// sibling and renamed into place.

#include "carsim/assumptions.hpp"
#include "carsim/carrying_simplex.hpp"
#include "carsim/registry.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace carsim {

using Json = nlohmann::ordered_json;

inline constexpr int kMaxDim = 6;

struct RunConfig {
  MapSpec map;
  int resolution = 0;        ///< lattice denominator m; 0 picks the per-dimension default
  double tolerance = 1e-6;
  int max_iter = 10000;
  double kappa_max = 1.0;
  int check_resolution = 0;  ///< box points per edge for the assumption checks; 0 = default
  double margin = kDefaultSafetyMargin;
  double epsilon_tol = 0.01;
  int sample_count = 1000;
  int horizon = 200;
  std::uint64_t seed = 0;
  double attraction_tol = 1e-3;
  double invariance_tol = 1e-3;
  double fixed_point_tol = 1e-4;
  std::string output_dir = "out";

  int effective_resolution(int dim) const { return resolution > 0 ? resolution : default_box_resolution(dim); }
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline ParamValue param_from_json(const std::string& key, const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && !v.empty() && v.front().is_array()) {
    std::vector<std::vector<double>> rows;
    for (const auto& row : v) {
      if (!row.is_array()) throw ConfigError("parameter '" + key + "': mixed nesting");
      std::vector<double> r;
      for (const auto& x : row) {
        if (!x.is_number()) throw ConfigError("parameter '" + key + "': non-numeric entry");
        r.push_back(x.get<double>());
      }
      rows.push_back(std::move(r));
    }
    return rows;
  }
  if (v.is_array()) {
    std::vector<double> r;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError("parameter '" + key + "': non-numeric entry");
      r.push_back(x.get<double>());
    }
    return r;
  }
  throw ConfigError("parameter '" + key + "' must be a number or an array");
}

template <class T>
void read_field(const Json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline void validate(const RunConfig& cfg) {
  if (cfg.resolution != 0 && cfg.resolution < 2) throw ConfigError("grid resolution must be at least 2");
  if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (cfg.max_iter < 0) throw ConfigError("max_iter must be nonnegative");
  if (!(cfg.kappa_max > 0.0)) throw ConfigError("kappa_max must be positive");
  if (cfg.check_resolution != 0 && cfg.check_resolution < 2) throw ConfigError("check_resolution must be at least 2");
  if (cfg.sample_count < 0) throw ConfigError("sample_count must be nonnegative");
  if (cfg.horizon < 0) throw ConfigError("horizon must be nonnegative");
  if (cfg.map.dim && (*cfg.map.dim < 1 || *cfg.map.dim > kMaxDim))
    throw ConfigError("map dim must lie in 1.." + std::to_string(kMaxDim));
}

inline RunConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  if (!j.contains("map") || !j.at("map").is_object()) throw ConfigError("config needs a 'map' section");
  const Json& m = j.at("map");
  if (!m.contains("name") || !m.at("name").is_string()) throw ConfigError("map section needs a 'name'");
  cfg.map.name = m.at("name").get<std::string>();
  if (m.contains("dim")) {
    if (!m.at("dim").is_number_integer()) throw ConfigError("map dim must be an integer");
    cfg.map.dim = m.at("dim").get<int>();
  }
  if (m.contains("params")) {
    if (!m.at("params").is_object()) throw ConfigError("map params must be an object");
    for (const auto& [key, value] : m.at("params").items()) cfg.map.params[key] = detail::param_from_json(key, value);
  }
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    detail::read_field(g, "resolution", cfg.resolution);
  }
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    detail::read_field(s, "tolerance", cfg.tolerance);
    detail::read_field(s, "max_iter", cfg.max_iter);
    detail::read_field(s, "kappa_max", cfg.kappa_max);
    detail::read_field(s, "check_resolution", cfg.check_resolution);
    detail::read_field(s, "margin", cfg.margin);
    detail::read_field(s, "epsilon_tol", cfg.epsilon_tol);
  }
  if (j.contains("verify")) {
    const Json& v = j.at("verify");
    detail::read_field(v, "sample_count", cfg.sample_count);
    detail::read_field(v, "horizon", cfg.horizon);
    detail::read_field(v, "seed", cfg.seed);
    detail::read_field(v, "attraction_tol", cfg.attraction_tol);
    detail::read_field(v, "invariance_tol", cfg.invariance_tol);
    detail::read_field(v, "fixed_point_tol", cfg.fixed_point_tol);
  }
  if (j.contains("output")) detail::read_field(j.at("output"), "dir", cfg.output_dir);
  validate(cfg);
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Writes text to a temporary sibling and renames it onto path.
inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_atomic(path, j.dump(2) + "\n"); }

/// CSV with header u_1,...,u_d,R and one row per grid vertex.
inline std::string manifold_to_csv(const RadialManifold& s) {
  std::ostringstream out;
  for (int i = 0; i < s.dim(); ++i) out << "u_" << (i + 1) << ',';
  out << "R\n";
  for (std::size_t v = 0; v < s.size(); ++v) {
    const Vec& u = s.grid().vertex(v);
    for (int i = 0; i < s.dim(); ++i) out << detail::fmt17(u[i]) << ',';
    out << detail::fmt17(s.radius(v)) << '\n';
  }
  return out.str();
}

inline void write_manifold_csv(const std::filesystem::path& path, const RadialManifold& s) {
  write_atomic(path, manifold_to_csv(s));
}

/// Parses a manifold CSV against the expected grid; any difference in
/// dimension, row count or vertex directions is a GridMismatch.
inline RadialManifold manifold_from_csv(const std::string& text, GridPtr grid,
                                        Provenance p = Provenance::sigma) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw GridMismatch("manifold CSV is empty");
  int cols = 1;
  for (char c : line) cols += c == ',';
  if (cols - 1 != grid->dim())
    throw GridMismatch("manifold CSV has dimension " + std::to_string(cols - 1) + ", grid has " +
                       std::to_string(grid->dim()));
  std::vector<double> radii;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= grid->size()) throw GridMismatch("manifold CSV has more rows than grid vertices");
    std::vector<double> vals;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw GridMismatch("manifold CSV row " + std::to_string(row + 1) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(vals.size()) != cols) throw GridMismatch("manifold CSV row " + std::to_string(row + 1) + " is ragged");
    const Vec& u = grid->vertex(row);
    for (int i = 0; i < grid->dim(); ++i)
      if (std::abs(vals[static_cast<std::size_t>(i)] - u[i]) > 1e-12)
        throw GridMismatch("manifold CSV row " + std::to_string(row + 1) + " is not the expected grid vertex");
    radii.push_back(vals.back());
    ++row;
  }
  if (row != grid->size())
    throw GridMismatch("manifold CSV has " + std::to_string(row) + " rows, grid has " + std::to_string(grid->size()));
  try {
    return RadialManifold(std::move(grid), std::move(radii), p);
  } catch (const DomainError& e) {
    throw GridMismatch(std::string("manifold CSV: ") + e.what());
  }
}

inline RadialManifold read_manifold_csv(const std::filesystem::path& path, GridPtr grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open manifold file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifold_from_csv(buf.str(), std::move(grid));
}

/// Rows n, x_1..x_d, dist.
inline std::string trajectory_to_csv(const std::vector<Vec>& orbit, const std::vector<double>& dist) {
  std::ostringstream out;
  out << 'n';
  const auto d = orbit.empty() ? 0 : orbit.front().size();
  for (Eigen::Index i = 0; i < d; ++i) out << ",x_" << (i + 1);
  out << ",dist\n";
  for (std::size_t n = 0; n < orbit.size(); ++n) {
    out << n;
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << detail::fmt17(orbit[n][i]);
    out << ',' << (n < dist.size() ? detail::fmt17(dist[n]) : std::string("nan")) << '\n';
  }
  return out.str();
}

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json map_json(const KolmogorovMap& map) {
  Json params = Json::object();
  for (const auto& [k, v] : map.params()) params[k] = v;
  return {{"name", map.name()}, {"dim", map.dim()}, {"params", params}};
}

inline Json to_json(const AssumptionReport& r) {
  Json j;
  j["as2_ok"] = r.as2.ok;
  j["as2_max_deviation"] = r.as2.max_deviation;
  j["as3_mode"] = to_string(r.as3.mode);
  j["as3_worst_entry"] = r.as3.worst_entry;
  j["as3_worst_index"] = {r.as3.worst_row, r.as3.worst_col};
  j["as3_worst_point"] = vec_json(r.as3.worst_point);
  if (!r.as3.reason.empty()) j["as3_reason"] = r.as3.reason;
  j["as4_ok"] = r.as4.ok;
  j["as4_kappa"] = r.as4.kappa;
  j["as4_margin"] = r.as4.margin;
  j["as4_max_rho"] = r.as4.max_rho;
  j["as4_argmax"] = vec_json(r.as4.argmax);
  j["kappa"] = r.kappa ? Json(*r.kappa) : Json();
  j["epsilon"] = r.epsilon ? Json(*r.epsilon) : Json();
  j["grid_resolution"] = r.grid_resolution;
  j["all_ok"] = r.all_ok();
  j["notes"] = r.notes;
  return j;
}

inline Json to_json(const ConvergenceReport& r) {
  Json j;
  j["termination"] = to_string(r.termination);
  j["iterations"] = r.iterations;
  j["tolerance"] = r.tolerance;
  j["final_gap"] = r.final_gap;
  j["certified_error"] = r.certified_error();
  j["interpolation_error"] = r.interpolation_error;
  j["tol_order"] = r.tol_order;
  j["gap_history"] = r.gap_history;
  j["hausdorff_history"] = r.hausdorff_history;
  j["monotonicity"] = {
      {"lower_violations", r.lower_monotone_violations},
      {"upper_violations", r.upper_monotone_violations},
      {"sandwich_violations", r.sandwich_violations},
      {"gap_increase_violations", r.gap_increase_violations},
      {"lower_violations_strict", r.lower_monotone_violations_strict},
      {"upper_violations_strict", r.upper_monotone_violations_strict},
      {"sandwich_violations_strict", r.sandwich_violations_strict},
  };
  if (!r.error_message.empty()) j["error"] = r.error_message;
  return j;
}

inline Json to_json(const VerificationReport& r) {
  Json j;
  j["seed"] = r.seed;
  j["passes"] = r.passes();
  j["invariance_residual"] = r.invariance_residual;
  j["invariance_constant"] = r.invariance_constant;
  j["invariance_tol"] = r.invariance_tol;
  j["tol_order"] = r.tol_order;
  j["unorder_violations"] = r.unorder_violations;
  j["fixed_point_residuals"] = r.fixed_point_residuals;
  j["fixed_point_tol"] = r.fixed_point_tol;
  j["lipschitz"] = {{"ratio_max", r.lipschitz_ratio_max},
                    {"bound", r.lipschitz_bound},
                    {"violations", r.lipschitz_violations},
                    {"vacuous", r.lipschitz_vacuous}};
  j["attraction"] = {{"seeds", r.attraction_seeds},
                     {"hits", r.attraction_hits},
                     {"fraction", r.attraction_fraction},
                     {"worst_distance", r.attraction_worst},
                     {"vacuous", r.attraction_vacuous}};
  j["harnack"] = {{"pairs", r.harnack_pairs},
                  {"checks", r.harnack_checks},
                  {"violations", r.harnack_violations},
                  {"unordered_images", r.harnack_unordered_images},
                  {"literal_counterexamples", r.harnack_literal_counterexamples},
                  {"vacuous", r.harnack_vacuous}};
  j["retrotone"] = {{"pairs", r.retrotone_pairs},
                    {"premises", r.retrotone_premises},
                    {"violations", r.retrotone_violations},
                    {"strict", r.retrotone_strict},
                    {"vacuous", r.retrotone_vacuous}};
  if (!r.error_message.empty()) j["error"] = r.error_message;
  return j;
}

}  // namespace carsim
