#pragma once

// The sandwich construction of the carrying simplex and the property
// battery run against a computed one.

#include "carsim/assumptions.hpp"
#include "carsim/graph_transform.hpp"
#include "carsim/metrics.hpp"
#include "carsim/radial.hpp"

#include <boost/math/tools/minima.hpp>

#include <Eigen/LU>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace carsim {

struct CarryingSimplexProblem {
  KolmogorovMap map;
  double kappa = 0.0;
  double epsilon = 0.5;
  GridPtr grid;

  double box_upper() const { return 1.0 + kappa; }
};

/// Builds the problem from a passing assumption report.
inline CarryingSimplexProblem make_problem(const KolmogorovMap& map, const AssumptionReport& rep,
                                           GridPtr grid) {
  if (!rep.all_ok()) throw AssumptionViolation(map.name() + ": standing assumptions do not hold");
  return {map, *rep.kappa, *rep.epsilon, std::move(grid)};
}

enum class Termination { converged, max_iter, fold_error };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iter: return "max_iter";
    case Termination::fold_error: return "fold_error";
  }
  return "unknown";
}

struct SolverOptions {
  double tolerance = 1e-6;
  int max_iter = 10000;
  ResampleOptions resample;
  /// Called after every lockstep cycle with (lower, upper, iteration).
  std::function<void(const RadialManifold&, const RadialManifold&, int)> on_iterate;
};

struct ConvergenceReport {
  int iterations = 0;
  std::vector<double> gap_history;        ///< sup_gap(S_n, S^n), n = 0..iterations
  std::vector<double> hausdorff_history;  ///< Hausdorff distance of the vertex clouds
  Termination termination = Termination::max_iter;
  double final_gap = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::optional<RadialManifold> lower;
  std::optional<RadialManifold> upper;
  std::optional<RadialManifold> sigma;
  std::string error_message;

  double tol_order = 0.0;            ///< 2 L h of sigma (or of the last upper iterate)
  double interpolation_error = 0.0;  ///< a-posteriori PL interpolation error of sigma
  // Monotonicity and sandwich counts. "strict" counts use a roundoff floor of
  // 1e-12 * max(1, R); the others allow tol_order.
  int lower_monotone_violations = 0;
  int upper_monotone_violations = 0;
  int sandwich_violations = 0;
  int gap_increase_violations = 0;
  int lower_monotone_violations_strict = 0;
  int upper_monotone_violations_strict = 0;
  int sandwich_violations_strict = 0;

  /// Radial error bound of sigma: half the final gap plus interpolation error.
  double certified_error() const { return 0.5 * final_gap + interpolation_error; }
  int monotonicity_violations() const {
    return lower_monotone_violations + upper_monotone_violations + sandwich_violations + gap_increase_violations;
  }
  int monotonicity_violations_strict() const {
    return lower_monotone_violations_strict + upper_monotone_violations_strict + sandwich_violations_strict;
  }
};

namespace detail {

inline double roundoff_floor(double r) { return 1e-12 * std::max(1.0, std::abs(r)); }

inline RadialManifold midpoint(const RadialManifold& a, const RadialManifold& b) {
  std::vector<double> radii(a.size());
  for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = 0.5 * (a.radius(i) + b.radius(i));
  return RadialManifold(a.grid_ptr(), std::move(radii), Provenance::sigma, std::max(a.iteration(), b.iteration()));
}

}  // namespace detail

/// Lower sequence from eps * Delta, upper sequence from the boundary of the
/// box [0, 1 + kappa]^d, stepped in lockstep until their sup gap falls
/// below the tolerance. Sigma is the vertex-wise midpoint.
inline ConvergenceReport compute_cs(const CarryingSimplexProblem& prob, const SolverOptions& opt = {}) {
  if (!(opt.tolerance > 0.0)) throw DomainError("compute_cs: tolerance must be positive");
  if (prob.map.dim() != prob.grid->dim()) throw GridMismatch("compute_cs: grid dimension differs from the map");
  const double box = prob.box_upper();
  ConvergenceReport rep;
  rep.tolerance = opt.tolerance;
  RadialManifold lower = scaled_simplex(prob.grid, prob.epsilon, Provenance::lower);
  RadialManifold upper = box_boundary_manifold(prob.grid, box, Provenance::upper);
  double gap = sup_gap(lower, upper);
  rep.gap_history.push_back(gap);
  rep.hausdorff_history.push_back(hausdorff_points(lower.vertex_cloud(), upper.vertex_cloud()));

  while (gap >= opt.tolerance && rep.iterations < opt.max_iter) {
    RadialManifold next_lower = lower;
    RadialManifold next_upper = upper;
    try {
      next_lower = graph_step(prob.map, lower, box, opt.resample);
      next_upper = graph_step(prob.map, upper, box, opt.resample);
    } catch (const FoldError& e) {
      rep.termination = Termination::fold_error;
      rep.error_message = e.what();
      break;
    } catch (const CoverageError& e) {
      rep.termination = Termination::fold_error;
      rep.error_message = e.what();
      break;
    }
    const double tol_lo = order_tolerance(lower);
    const double tol_up = order_tolerance(upper);
    for (std::size_t i = 0; i < lower.size(); ++i) {
      const double dl = next_lower.radius(i) - lower.radius(i);
      const double du = next_upper.radius(i) - upper.radius(i);
      const double ds = next_lower.radius(i) - next_upper.radius(i);
      if (dl < -tol_lo) ++rep.lower_monotone_violations;
      if (du > tol_up) ++rep.upper_monotone_violations;
      if (ds > tol_up) ++rep.sandwich_violations;
      if (dl < -detail::roundoff_floor(lower.radius(i))) ++rep.lower_monotone_violations_strict;
      if (du > detail::roundoff_floor(upper.radius(i))) ++rep.upper_monotone_violations_strict;
      if (ds > detail::roundoff_floor(upper.radius(i))) ++rep.sandwich_violations_strict;
    }
    lower = std::move(next_lower);
    upper = std::move(next_upper);
    ++rep.iterations;
    const double next_gap = sup_gap(lower, upper);
    if (next_gap > gap + std::max(tol_up, detail::roundoff_floor(gap))) ++rep.gap_increase_violations;
    gap = next_gap;
    rep.gap_history.push_back(gap);
    rep.hausdorff_history.push_back(hausdorff_points(lower.vertex_cloud(), upper.vertex_cloud()));
    if (opt.on_iterate) opt.on_iterate(lower, upper, rep.iterations);
  }

  rep.final_gap = gap;
  if (rep.termination != Termination::fold_error)
    rep.termination = gap < opt.tolerance ? Termination::converged : Termination::max_iter;
  rep.sigma = detail::midpoint(lower, upper);
  rep.tol_order = order_tolerance(*rep.sigma);
  rep.interpolation_error = interpolation_error_estimate(*rep.sigma);
  rep.lower = std::move(lower);
  rep.upper = std::move(upper);
  return rep;
}

struct SeedRun {
  std::optional<RadialManifold> manifold;
  int iterations = 0;
  bool converged = false;
  double last_step = std::numeric_limits<double>::infinity();
};

/// Iterates graph_step from an arbitrary seed until successive iterates
/// differ by less than step_tol.
inline SeedRun iterate_from_seed(const CarryingSimplexProblem& prob, RadialManifold seed, double step_tol,
                                 int max_iter = 10000, const ResampleOptions& ropt = {}) {
  SeedRun run;
  RadialManifold cur = std::move(seed);
  while (run.iterations < max_iter) {
    RadialManifold next = graph_step(prob.map, cur, prob.box_upper(), ropt);
    run.last_step = sup_gap(cur, next);
    cur = std::move(next);
    ++run.iterations;
    if (run.last_step < step_tol) {
      run.converged = true;
      break;
    }
  }
  run.manifold = std::move(cur);
  return run;
}

/// G_*(u) = T(F(R_*(u) u)).
inline Vec induced_map(const KolmogorovMap& map, const RadialManifold& sigma, const Vec& u) {
  return radial_project(eval_F(map, sigma.eval(u)));
}

enum class GammaClass { origin, below, on, above };

inline const char* to_string(GammaClass g) {
  switch (g) {
    case GammaClass::origin: return "origin";
    case GammaClass::below: return "below";
    case GammaClass::on: return "on";
    case GammaClass::above: return "above";
  }
  return "unknown";
}

struct GammaMembership {
  GammaClass cls = GammaClass::origin;
  double margin = 0.0;  ///< |x|_1 - R_*(T(x)); zero for the origin
};

/// Position of x relative to Sigma along its ray, resolved at scale tol.
inline GammaMembership gamma_membership(const RadialManifold& sigma, const Vec& x, double tol) {
  if (x.size() != sigma.dim() || !x.allFinite() || (x.array() < 0.0).any())
    throw DomainError("gamma_membership: x must be a finite point of the orthant");
  if (x.sum() == 0.0) return {GammaClass::origin, 0.0};
  const Vec u = radial_project(x);
  const double margin = x.sum() - sigma.radius_at(u);
  if (margin < -tol) return {GammaClass::below, margin};
  if (margin > tol) return {GammaClass::above, margin};
  return {GammaClass::on, margin};
}

/// Euclidean distance from x to Sigma along the ray through x; for x = 0,
/// the distance to the nearest vertex point.
inline double distance_to_sigma(const RadialManifold& sigma, const Vec& x) {
  if (x.sum() > 0.0) {
    const Vec u = radial_project(x);
    return (x - sigma.radius_at(u) * u).norm();
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sigma.size(); ++i) best = std::min(best, (x - sigma.point(i)).norm());
  return best;
}

inline constexpr double kEscapeBound = 1e6;

/// x0, F(x0), ..., F^n(x0); throws EscapeError once |x|_inf exceeds the bound.
inline std::vector<Vec> simulate_orbit(const KolmogorovMap& map, const Vec& x0, int n,
                                       double escape_bound = kEscapeBound) {
  std::vector<Vec> orbit;
  orbit.reserve(static_cast<std::size_t>(n) + 1);
  Vec x = x0;
  for (int k = 0; k <= n; ++k) {
    if (x.size() > 0 && x.maxCoeff() > escape_bound)
      throw EscapeError("orbit left the safety box at step " + std::to_string(k));
    orbit.push_back(x);
    if (k < n) x = eval_F(map, x);
  }
  return orbit;
}

/// dist(F^n(x0), Sigma) for n = 0..N.
inline std::vector<double> attract_trajectory(const KolmogorovMap& map, const RadialManifold& sigma,
                                              const Vec& x0, int n, double escape_bound = kEscapeBound) {
  if (!(x0.sum() > 0.0)) throw DomainError("attract_trajectory: x0 must be nonzero");
  std::vector<double> out;
  for (const Vec& x : simulate_orbit(map, x0, n, escape_bound)) out.push_back(distance_to_sigma(sigma, x));
  return out;
}

struct ShadowResult {
  Vec point;        ///< y on Sigma
  Vec direction;    ///< T(y)
  double residual;  ///< |F^N(x0) - F^N(y)|
};

/// Finite-horizon asymptotic phase: the point y on Sigma whose N-th iterate
/// is closest to F^N(x0). Best vertex first, then Brent line searches along
/// the edges of the cells around the current best direction.
inline ShadowResult shadow_point(const KolmogorovMap& map, const RadialManifold& sigma, const Vec& x0, int n) {
  const Vec target = iterate_F(map, x0, n);
  auto cost = [&](const Vec& u) { return (iterate_F(map, sigma.eval(u), n) - target).norm(); };
  const auto& grid = sigma.grid();
  std::size_t best_v = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = cost(grid.vertex(i));
    if (c < best) {
      best = c;
      best_v = i;
    }
  }
  Vec best_u = grid.vertex(best_v);
  if (grid.dim() > 1) {
    for (int round = 0; round < 4 * grid.dim(); ++round) {
      const double before = best;
      // vertices of every cell containing the current best direction
      std::vector<std::size_t> around;
      const auto loc = grid.locate(best_u);
      for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        const auto cell = grid.cell(c);
        bool touches = false;
        for (std::size_t v : loc.vertices)
          for (std::size_t w : cell) touches = touches || v == w;
        if (touches) around.insert(around.end(), cell.begin(), cell.end());
      }
      std::sort(around.begin(), around.end());
      around.erase(std::unique(around.begin(), around.end()), around.end());
      for (std::size_t v : around) {
        const Vec& end = grid.vertex(v);
        if ((end - best_u).lpNorm<Eigen::Infinity>() == 0.0) continue;
        const Vec start = best_u;
        auto along = [&](double t) {
          Vec u = ((1.0 - t) * start + t * end).cwiseMax(0.0);
          return cost(u / u.sum());
        };
        const auto [t, c] = boost::math::tools::brent_find_minima(along, 0.0, 1.0, 40);
        if (c < best) {
          best = c;
          Vec u = ((1.0 - t) * start + t * end).cwiseMax(0.0);
          best_u = u / u.sum();
        }
      }
      if (!(best < before - 1e-16)) break;
    }
  }
  return {sigma.eval(best_u), best_u, best};
}

struct VerifyOptions {
  int sample_count = 1000;      ///< pairs per sampling battery
  int horizon = 200;            ///< N for the attraction battery
  std::uint64_t seed = 0;
  double box_upper = 1.0;       ///< 1 + kappa
  double attraction_tol = 1e-3;
  int attraction_seeds = 100;   ///< capped at sample_count
  bool strict_retrotone = false;
  double invariance_tol = 1e-3;
  double fixed_point_tol = 1e-4;
  double attraction_fraction_min = 0.95;
};

struct VerificationReport {
  std::uint64_t seed = 0;
  double invariance_residual = 0.0;
  double invariance_constant = 0.0;  ///< residual / grid spacing
  double tol_order = 0.0;
  int unorder_violations = 0;
  std::vector<double> fixed_point_residuals;
  double lipschitz_ratio_max = 0.0;
  double lipschitz_bound = 0.0;
  int lipschitz_violations = 0;
  bool lipschitz_vacuous = false;
  int attraction_seeds = 0;
  int attraction_hits = 0;
  double attraction_fraction = 0.0;
  double attraction_worst = 0.0;
  bool attraction_vacuous = false;
  int harnack_pairs = 0;
  int harnack_checks = 0;
  int harnack_violations = 0;
  int harnack_unordered_images = 0;         ///< checks where F(x) <= F(y) fails on J
  int harnack_literal_counterexamples = 0;  ///< of those, checks where mu drops
  bool harnack_vacuous = false;
  int retrotone_pairs = 0;
  int retrotone_premises = 0;
  int retrotone_violations = 0;
  bool retrotone_strict = false;
  bool retrotone_vacuous = false;
  std::string error_message;

  /// Pass/fail thresholds used by passes().
  double invariance_tol = 1e-3;
  double fixed_point_tol = 1e-4;
  double attraction_fraction_min = 0.95;

  double fixed_point_residual_max() const {
    double m = 0.0;
    for (double r : fixed_point_residuals) m = std::max(m, r);
    return m;
  }

  bool passes() const {
    return error_message.empty() && invariance_residual <= invariance_tol && unorder_violations == 0 &&
           fixed_point_residual_max() <= fixed_point_tol && lipschitz_violations == 0 &&
           (attraction_vacuous || attraction_fraction >= attraction_fraction_min) && harnack_violations == 0 &&
           retrotone_violations == 0;
  }
};

namespace detail {

inline Vec uniform_point(std::mt19937_64& rng, int d, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = dist(rng);
  return x;
}

inline SupportIndex random_support(std::mt19937_64& rng, int d) {
  std::uniform_int_distribution<std::uint32_t> dist(1u, (1u << d) - 1u);
  return {dist(rng)};
}

/// Newton solve of F(y) = z from y0; nullopt if it fails or leaves [0, box].
inline std::optional<Vec> preimage(const KolmogorovMap& map, const Vec& z, Vec y, double box) {
  for (int it = 0; it < 50; ++it) {
    const Vec r = eval_F(map, y) - z;
    if (r.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, z.lpNorm<Eigen::Infinity>())) {
      if (y.maxCoeff() > box) return std::nullopt;
      return y;
    }
    const Eigen::PartialPivLU<Mat> lu(eval_DF(map, y));
    y = (y - lu.solve(r)).cwiseMax(0.0);
    if (!y.allFinite() || y.maxCoeff() > 10.0 * box) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

/// Property battery against a computed Sigma: invariance, unorderedness,
/// axis fixed points, Lipschitz bound, attraction, Harnack contraction and
/// retrotonicity.
inline VerificationReport verify_cs(const KolmogorovMap& map, const RadialManifold& sigma,
                                    const VerifyOptions& opt) {
  if (map.dim() != sigma.dim()) throw GridMismatch("verify_cs: sigma dimension differs from the map");
  const int d = map.dim();
  const double box = opt.box_upper;
  VerificationReport rep;
  rep.seed = opt.seed;
  rep.invariance_tol = opt.invariance_tol;
  rep.fixed_point_tol = opt.fixed_point_tol;
  rep.attraction_fraction_min = opt.attraction_fraction_min;
  std::mt19937_64 rng(opt.seed);

  // invariance
  try {
    const RadialManifold image = graph_step(map, sigma, box);
    rep.invariance_residual = hausdorff_points(sigma.vertex_cloud(), image.vertex_cloud());
  } catch (const Error& e) {
    rep.error_message = e.what();
    rep.invariance_residual = std::numeric_limits<double>::infinity();
  }
  const double h = sigma.grid().spacing();
  rep.invariance_constant = h > 0.0 ? rep.invariance_residual / h : 0.0;

  rep.tol_order = order_tolerance(sigma);
  rep.unorder_violations = static_cast<int>(order_violations(sigma, rep.tol_order).size());

  for (int i = 0; i < d; ++i)
    rep.fixed_point_residuals.push_back(std::abs(sigma.radius(sigma.grid().corner(i)) - 1.0));

  // Lipschitz bound of the projection along e
  rep.lipschitz_bound = std::sqrt(1.0 + d);
  rep.lipschitz_vacuous = d == 1;
  if (!rep.lipschitz_vacuous) {
    const auto cloud = sigma.vertex_cloud();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (std::size_t j = i + 1; j < cloud.size(); ++j) {
        const double num = (cloud[i] - cloud[j]).norm();
        const double den = project_e_perp(cloud[i] - cloud[j]).norm();
        if (num == 0.0) continue;
        const double ratio = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
        rep.lipschitz_ratio_max = std::max(rep.lipschitz_ratio_max, ratio);
        if (ratio > rep.lipschitz_bound * (1.0 + 1e-9)) ++rep.lipschitz_violations;
      }
    }
  }

  // attraction
  rep.attraction_seeds = std::min(opt.sample_count, opt.attraction_seeds);
  rep.attraction_vacuous = rep.attraction_seeds == 0;
  for (int s = 0; s < rep.attraction_seeds; ++s) {
    Vec x0;
    do x0 = detail::uniform_point(rng, d, 0.0, box);
    while (x0.sum() < 0.1);
    const double dist = distance_to_sigma(sigma, iterate_F(map, x0, opt.horizon));
    rep.attraction_worst = std::max(rep.attraction_worst, dist);
    if (dist < opt.attraction_tol) ++rep.attraction_hits;
  }
  if (rep.attraction_seeds > 0)
    rep.attraction_fraction = static_cast<double>(rep.attraction_hits) / rep.attraction_seeds;

  // Harnack contraction on ordered common-support pairs x < y with x_i < y_i
  // on I. For each J in I the min ratio min_J F_i(x) / F_i(y) must exceed
  // min_J x_i / y_i; this is the symmetrized order mu whenever the images stay
  // ordered on J. When they do not, mu itself may drop; such pairs are
  // counted as literal counterexamples but are not violations.
  rep.harnack_vacuous = opt.sample_count == 0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int p = 0; p < opt.sample_count; ++p) {
    const SupportIndex set = detail::random_support(rng, d);
    Vec x(d), y(d);
    for (int i = 0; i < d; ++i) {
      if (set.contains(i)) {
        x[i] = box * (0.001 + 0.998 * unit(rng));
        y[i] = x[i] + (box - x[i]) * (0.001 + 0.999 * unit(rng));
      } else {
        x[i] = unit(rng) < 0.25 ? 0.0 : box * unit(rng);
        y[i] = x[i];
      }
    }
    ++rep.harnack_pairs;
    const Vec fx = eval_F(map, x);
    const Vec fy = eval_F(map, y);
    for (std::uint32_t jm = 1; jm <= set.mask; ++jm) {
      const SupportIndex sub{jm};
      if (!set.includes(sub)) continue;
      ++rep.harnack_checks;
      double ratio_before = std::numeric_limits<double>::infinity();
      double ratio_after = std::numeric_limits<double>::infinity();
      bool images_ordered = true;
      for (int i = 0; i < d; ++i) {
        if (!sub.contains(i)) continue;
        ratio_before = std::min(ratio_before, x[i] / y[i]);
        ratio_after = std::min(ratio_after, fx[i] / fy[i]);
        if (fx[i] > fy[i]) images_ordered = false;
      }
      const double before = symmetrized_order(mask(x, sub), mask(y, sub));
      const double after = symmetrized_order(mask(fx, sub), mask(fy, sub));
      const bool mu_grows = after > before - 1e-12;
      if (!images_ordered) ++rep.harnack_unordered_images;
      if (!mu_grows && !images_ordered) ++rep.harnack_literal_counterexamples;
      if (!(ratio_after > ratio_before - 1e-12) || (images_ordered && !mu_grows)) ++rep.harnack_violations;
    }
  }

  // retrotonicity: half independent pairs, half constructed so that
  // F(x) < F(y) holds by solving F(y) = F(x) + eta (independent if that fails)
  rep.retrotone_strict = opt.strict_retrotone;
  for (int p = 0; p < opt.sample_count; ++p) {
    const Vec x = detail::uniform_point(rng, d, 0.0, box);
    Vec y;
    if (p % 2 == 0) {
      y = detail::uniform_point(rng, d, 0.0, box);
    } else {
      const Vec fx = eval_F(map, x);
      Vec eta = Vec::Zero(d);
      const SupportIndex set = detail::random_support(rng, d);
      for (int i = 0; i < d; ++i)
        if (set.contains(i)) eta[i] = 0.2 * unit(rng) * std::max(fx[i], 0.05);
      auto pre = detail::preimage(map, fx + eta, x, box);
      y = pre ? *pre : detail::uniform_point(rng, d, 0.0, box);
    }
    ++rep.retrotone_pairs;
    const Vec fx = eval_F(map, x);
    const Vec fy = eval_F(map, y);
    bool premise = true;
    bool any = false;
    for (int i = 0; i < d; ++i) {
      if (fy[i] - fx[i] < -1e-12) premise = false;
      if (fy[i] - fx[i] > 1e-12) any = true;
    }
    if (!premise || !any) continue;
    ++rep.retrotone_premises;
    bool ok = true;
    bool any_strict = false;
    for (int i = 0; i < d; ++i) {
      const bool resolved = fy[i] - fx[i] > 1e-12;
      if (x[i] > y[i] + 1e-12) ok = false;
      if (resolved && !(x[i] < y[i])) ok = false;
      if (opt.strict_retrotone && y[i] > 0.0 && !(x[i] < y[i])) ok = false;
      if (x[i] < y[i]) any_strict = true;
    }
    if (!any_strict) ok = false;
    if (!ok) ++rep.retrotone_violations;
  }
  rep.retrotone_vacuous = rep.retrotone_premises == 0;
  return rep;
}

}  // namespace carsim
