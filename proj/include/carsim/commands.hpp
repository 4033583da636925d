#pragma once

// The command layer behind the CLI. Each command returns its exit code;
// human-readable progress goes to the supplied stream.

#include "carsim/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace carsim {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failed = 1;
inline constexpr int config = 2;
inline constexpr int fold = 3;
inline constexpr int escape = 3;
}  // namespace exit_code

inline constexpr const char* kOutDirEnv = "CARSIM_OUT_DIR";

/// Command-line overrides; unset fields leave the config value alone.
struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> resolution;
  std::optional<double> tolerance;
  std::optional<int> max_iter;
  std::optional<std::string> sigma_path;
  std::optional<std::string> x0;
  std::optional<int> steps;
  bool dump_iterates = false;
};

/// Config file, then the output-directory environment variable, then flags.
inline RunConfig resolve_config(const CommandOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_config(opt.config_path);
  if (const char* env = std::getenv(kOutDirEnv); env && *env) cfg.output_dir = env;
  if (opt.out_dir) cfg.output_dir = *opt.out_dir;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.resolution) cfg.resolution = *opt.resolution;
  if (opt.tolerance) cfg.tolerance = *opt.tolerance;
  if (opt.max_iter) cfg.max_iter = *opt.max_iter;
  validate(cfg);
  return cfg;
}

inline CheckOptions check_options(const RunConfig& cfg) {
  CheckOptions c;
  c.resolution = cfg.check_resolution;
  c.kappa_max = cfg.kappa_max;
  c.epsilon_tol = cfg.epsilon_tol;
  c.margin = cfg.margin;
  return c;
}

inline GridPtr config_grid(const RunConfig& cfg, int dim) {
  return make_grid(dim, dim == 1 ? 1 : cfg.effective_resolution(dim));
}

namespace detail {

inline Json run_header(const RunConfig& cfg, const KolmogorovMap& map) {
  return {{"map", map_json(map)}, {"seed", cfg.seed}};
}

inline KolmogorovMap checked_map(const RunConfig& cfg) {
  KolmogorovMap map = make_map(cfg.map);
  if (map.dim() > kMaxDim) throw ConfigError("map dimension exceeds the cap of " + std::to_string(kMaxDim));
  return map;
}

template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const GridMismatch& e) {
    log << "grid mismatch: " << e.what() << '\n';
    return exit_code::config;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::failed;
  }
}

inline Vec parse_point(const std::string& text, int dim) {
  std::vector<double> vals;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("--x0: bad number '" + cell + "'");
    }
  }
  if (static_cast<int>(vals.size()) != dim)
    throw ConfigError("--x0 needs " + std::to_string(dim) + " comma-separated values");
  Vec x(dim);
  for (int i = 0; i < dim; ++i) {
    x[i] = vals[static_cast<std::size_t>(i)];
    if (!std::isfinite(x[i]) || x[i] < 0.0) throw ConfigError("--x0 must be finite and nonnegative");
  }
  return x;
}

inline std::string iterate_name(const char* kind, int n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.csv", kind, n);
  return buf;
}

}  // namespace detail

/// Writes assumptions.json; exit 0 iff AS2, AS3 (weak or strict) and AS4 hold.
inline int run_check(const CommandOptions& opt, std::ostream& log = std::cout) {
  return detail::guarded(log, [&] {
    const RunConfig cfg = resolve_config(opt);
    const KolmogorovMap map = detail::checked_map(cfg);
    const AssumptionReport rep = check_assumptions(map, check_options(cfg));
    Json j = detail::run_header(cfg, map);
    j["report"] = to_json(rep);
    const auto path = std::filesystem::path(cfg.output_dir) / "assumptions.json";
    write_json(path, j);
    log << map.name() << ": AS2 " << (rep.as2.ok ? "ok" : "FAIL") << ", AS3 " << to_string(rep.as3.mode)
        << ", AS4 " << (rep.as4.ok ? "ok" : "FAIL") << " (max rho " << rep.as4.max_rho << ")";
    if (rep.kappa) log << ", kappa " << *rep.kappa;
    if (rep.epsilon) log << ", eps " << *rep.epsilon;
    log << "\nwrote " << path.string() << '\n';
    return rep.all_ok() ? exit_code::ok : exit_code::failed;
  });
}

/// Writes sigma.csv and convergence.json. Exit 0 converged, 1 assumptions
/// failed or max_iter reached, 3 fold (partial manifolds are dumped).
inline int run_compute(const CommandOptions& opt, std::ostream& log = std::cout) {
  return detail::guarded(log, [&] {
    const RunConfig cfg = resolve_config(opt);
    const KolmogorovMap map = detail::checked_map(cfg);
    const std::filesystem::path out(cfg.output_dir);
    const AssumptionReport check = check_assumptions(map, check_options(cfg));
    if (!check.all_ok()) {
      Json j = detail::run_header(cfg, map);
      j["report"] = to_json(check);
      write_json(out / "assumptions.json", j);
      log << map.name() << ": standing assumptions fail; see " << (out / "assumptions.json").string() << '\n';
      return exit_code::failed;
    }
    const GridPtr grid = config_grid(cfg, map.dim());
    const CarryingSimplexProblem prob = make_problem(map, check, grid);
    SolverOptions sopt;
    sopt.tolerance = cfg.tolerance;
    sopt.max_iter = cfg.max_iter;
    if (opt.dump_iterates) {
      write_manifold_csv(out / "iterates" / detail::iterate_name("lower", 0),
                         scaled_simplex(grid, prob.epsilon, Provenance::lower));
      write_manifold_csv(out / "iterates" / detail::iterate_name("upper", 0),
                         box_boundary_manifold(grid, prob.box_upper(), Provenance::upper));
      sopt.on_iterate = [&](const RadialManifold& lo, const RadialManifold& up, int n) {
        write_manifold_csv(out / "iterates" / detail::iterate_name("lower", n), lo);
        write_manifold_csv(out / "iterates" / detail::iterate_name("upper", n), up);
      };
    }
    const ConvergenceReport rep = compute_cs(prob, sopt);

    Json j = detail::run_header(cfg, map);
    j["kappa"] = prob.kappa;
    j["epsilon"] = prob.epsilon;
    j["resolution"] = grid->resolution();
    j["report"] = to_json(rep);
    if (rep.termination != Termination::converged) {
      write_manifold_csv(out / "lower_partial.csv", *rep.lower);
      write_manifold_csv(out / "upper_partial.csv", *rep.upper);
    }
    if (rep.termination != Termination::fold_error) write_manifold_csv(out / "sigma.csv", *rep.sigma);
    write_json(out / "convergence.json", j);
    log << map.name() << ": " << to_string(rep.termination) << " after " << rep.iterations
        << " iterations, final gap " << rep.final_gap << ", certified error " << rep.certified_error() << '\n';
    if (!rep.error_message.empty()) log << rep.error_message << '\n';
    switch (rep.termination) {
      case Termination::converged: return exit_code::ok;
      case Termination::fold_error: return exit_code::fold;
      case Termination::max_iter: return exit_code::failed;
    }
    return exit_code::failed;
  });
}

inline int run_export_iterates(CommandOptions opt, std::ostream& log = std::cout) {
  opt.dump_iterates = true;
  return run_compute(opt, log);
}

/// Reads sigma (default <out>/sigma.csv), writes verification.json; exit 0
/// iff every battery passes.
inline int run_verify(const CommandOptions& opt, std::ostream& log = std::cout) {
  return detail::guarded(log, [&] {
    const RunConfig cfg = resolve_config(opt);
    const KolmogorovMap map = detail::checked_map(cfg);
    const std::filesystem::path out(cfg.output_dir);
    const std::filesystem::path sigma_path = opt.sigma_path ? *opt.sigma_path : (out / "sigma.csv").string();
    const GridPtr grid = config_grid(cfg, map.dim());
    const RadialManifold sigma = read_manifold_csv(sigma_path, grid);
    const AssumptionReport check = check_assumptions(map, check_options(cfg));
    if (!check.all_ok()) {
      log << map.name() << ": standing assumptions fail; nothing to verify against\n";
      return exit_code::failed;
    }
    VerifyOptions vopt;
    vopt.sample_count = cfg.sample_count;
    vopt.horizon = cfg.horizon;
    vopt.seed = cfg.seed;
    vopt.box_upper = 1.0 + *check.kappa;
    vopt.attraction_tol = cfg.attraction_tol;
    vopt.invariance_tol = cfg.invariance_tol;
    vopt.fixed_point_tol = cfg.fixed_point_tol;
    vopt.strict_retrotone = check.as3.mode == As3Mode::strict;
    const VerificationReport rep = verify_cs(map, sigma, vopt);
    Json j = detail::run_header(cfg, map);
    j["sigma"] = sigma_path.string();
    j["report"] = to_json(rep);
    write_json(out / "verification.json", j);
    log << map.name() << ": verification " << (rep.passes() ? "passed" : "FAILED") << " (invariance residual "
        << rep.invariance_residual << ", unorder violations " << rep.unorder_violations << ", harnack violations "
        << rep.harnack_violations << ", retrotone violations " << rep.retrotone_violations << ")\n";
    return rep.passes() ? exit_code::ok : exit_code::failed;
  });
}

/// Writes trajectory.csv (n, x_1..x_d, dist). Distances are measured to the
/// sigma given by --sigma, or to a freshly computed one; they are nan when
/// the assumptions fail. Exit 3 if the orbit escapes.
inline int run_simulate(const CommandOptions& opt, std::ostream& log = std::cout) {
  return detail::guarded(log, [&] {
    const RunConfig cfg = resolve_config(opt);
    const KolmogorovMap map = detail::checked_map(cfg);
    if (!opt.x0) throw ConfigError("simulate needs --x0");
    const Vec x0 = detail::parse_point(*opt.x0, map.dim());
    const int steps = opt.steps ? *opt.steps : cfg.horizon;
    if (steps < 0) throw ConfigError("--steps must be nonnegative");
    const GridPtr grid = config_grid(cfg, map.dim());

    std::optional<RadialManifold> sigma;
    if (opt.sigma_path) {
      sigma = read_manifold_csv(*opt.sigma_path, grid);
    } else {
      const AssumptionReport check = check_assumptions(map, check_options(cfg));
      if (check.all_ok()) {
        SolverOptions sopt;
        sopt.tolerance = cfg.tolerance;
        sopt.max_iter = cfg.max_iter;
        ConvergenceReport rep = compute_cs(make_problem(map, check, grid), sopt);
        if (rep.termination == Termination::converged) sigma = std::move(rep.sigma);
      }
    }
    std::vector<Vec> orbit;
    try {
      orbit = simulate_orbit(map, x0, steps);
    } catch (const EscapeError& e) {
      log << "escape: " << e.what() << '\n';
      return exit_code::escape;
    }
    std::vector<double> dist;
    if (sigma)
      for (const Vec& x : orbit) dist.push_back(distance_to_sigma(*sigma, x));
    const auto path = std::filesystem::path(cfg.output_dir) / "trajectory.csv";
    write_atomic(path, trajectory_to_csv(orbit, dist));
    log << map.name() << ": " << steps << " steps, final distance to sigma "
        << (dist.empty() ? std::string("n/a") : detail::fmt17(dist.back())) << "\nwrote " << path.string() << '\n';
    return exit_code::ok;
  });
}

}  // namespace carsim
