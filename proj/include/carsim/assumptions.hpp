#pragma once

// Grid-sampled certification of the standing hypotheses on a Kolmogorov map,
// and the choice of the trapping-box margin kappa and inner radius epsilon.

#include "carsim/kolmo_map.hpp"
#include "carsim/simplex_grid.hpp"
#include "carsim/spectral.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace carsim {

inline constexpr double kDefaultSafetyMargin = 0.02;

/// Calls fn(x) for every point j * upper / (res - 1), j in {0..res-1}^d.
template <class Fn>
void for_each_box_point(int dim, double upper, int res, Fn&& fn) {
  if (res < 2) throw DomainError("box sampling needs at least two points per edge");
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vec x = Vec::Zero(dim);
  const double step = upper / (res - 1);
  while (true) {
    for (int i = 0; i < dim; ++i) x[i] = idx[static_cast<std::size_t>(i)] * step;
    fn(static_cast<const Vec&>(x));
    int j = dim - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == res - 1) idx[static_cast<std::size_t>(j--)] = 0;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
  }
}

struct As2Result {
  bool ok = false;
  double max_deviation = 0.0;
  std::vector<double> deviations;  ///< |f_i(e_i) - 1|
};

/// Passes iff max_i |f_i(e_i) - 1| < tol.
inline As2Result check_as2(const KolmogorovMap& map, double tol = 1e-12) {
  As2Result out;
  for (int i = 0; i < map.dim(); ++i) {
    Vec e = Vec::Zero(map.dim());
    e[i] = 1.0;
    const double dev = std::abs(eval_f(map, e)[i] - 1.0);
    out.deviations.push_back(dev);
    out.max_deviation = std::max(out.max_deviation, dev);
  }
  out.ok = out.max_deviation < tol;
  return out;
}

enum class As3Mode { strict, weak, fail };

inline const char* to_string(As3Mode m) {
  switch (m) {
    case As3Mode::strict: return "strict";
    case As3Mode::weak: return "weak";
    case As3Mode::fail: return "fail";
  }
  return "unknown";
}

struct As3Result {
  As3Mode mode = As3Mode::fail;
  /// Largest sampled entry of Df (the one closest to violating), or the
  /// offending entry on failure.
  double worst_entry = 0.0;
  int worst_row = -1;
  int worst_col = -1;
  Vec worst_point;
  std::string reason;
};

/// Sign pattern of Df over the box [0, upper]^d: strict if every entry is
/// negative, weak if entries are nonpositive with negative diagonal.
inline As3Result check_as3(const KolmogorovMap& map, double upper, int res) {
  As3Result out;
  out.mode = As3Mode::strict;
  out.worst_entry = -std::numeric_limits<double>::infinity();
  const int d = map.dim();
  const double zero_tol = map.has_analytic_jacobian() ? 0.0 : 1e-7;
  bool failed = false;
  for_each_box_point(d, upper, res, [&](const Vec& x) {
    if (failed) return;
    Vec fx;
    try {
      fx = eval_f(map, x);
    } catch (const AssumptionViolation&) {
      failed = true;
      out.mode = As3Mode::fail;
      out.worst_point = x;
      out.reason = "f has a non-positive component";
      return;
    }
    const Mat df = eval_df(map, x);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double v = df(i, j);
        const double scale = zero_tol * (1.0 + std::abs(fx[i]));
        const bool diag = i == j;
        const bool violates = diag ? !(v < -scale) : v > scale;
        if (violates) {
          failed = true;
          out.mode = As3Mode::fail;
          out.worst_entry = v;
          out.worst_row = i;
          out.worst_col = j;
          out.worst_point = x;
          out.reason = diag ? "diagonal entry of Df is not negative" : "off-diagonal entry of Df is positive";
          return;
        }
        if (!diag && !(v < -scale)) out.mode = As3Mode::weak;
        if (v > out.worst_entry) {
          out.worst_entry = v;
          out.worst_row = i;
          out.worst_col = j;
          out.worst_point = x;
        }
      }
    }
  });
  return out;
}

struct As4Result {
  bool ok = false;
  double kappa = 0.0;
  double margin = kDefaultSafetyMargin;
  double max_rho = 0.0;
  Vec argmax;
  std::string reason;
};

/// rho(Z(x)) over the grid of [0, 1 + kappa]^d minus the origin; passes iff
/// the maximum stays below 1 - margin.
inline As4Result check_as4(const KolmogorovMap& map, double kappa, int res,
                           double margin = kDefaultSafetyMargin) {
  if (kappa < 0.0) throw DomainError("check_as4: kappa must be nonnegative");
  As4Result out;
  out.kappa = kappa;
  out.margin = margin;
  out.max_rho = 0.0;
  out.argmax = Vec::Zero(map.dim());
  bool broken = false;
  for_each_box_point(map.dim(), 1.0 + kappa, res, [&](const Vec& x) {
    if (broken || x.isZero(0.0)) return;
    double rho = 0.0;
    try {
      rho = spectral_radius(eval_Z(map, x));
    } catch (const AssumptionViolation& e) {
      broken = true;
      out.reason = e.what();
      out.argmax = x;
      out.max_rho = std::numeric_limits<double>::infinity();
      return;
    }
    if (rho > out.max_rho) {
      out.max_rho = rho;
      out.argmax = x;
    }
  });
  out.ok = !broken && out.max_rho < 1.0 - margin;
  if (!out.ok && out.reason.empty()) out.reason = "spectral radius of Z reaches 1 - margin";
  return out;
}

/// Jury condition for the planar Ricker map at (1, 1): r + s < 1 + rs(1 - ab) < 2.
inline bool jury_condition_ricker2d(double r, double s, double a, double b) {
  const double mid = 1.0 + r * s * (1.0 - a * b);
  return r + s < mid && mid < 2.0;
}

/// Largest kappa in {kappa_max, kappa_max / 2, ..., kappa_max / 2^10} for
/// which check_as4 passes. Requires AS4 at kappa = 0.
inline double find_kappa(const KolmogorovMap& map, int res, double kappa_max,
                         double margin = kDefaultSafetyMargin) {
  if (!(kappa_max > 0.0)) throw DomainError("find_kappa: kappa_max must be positive");
  if (!check_as4(map, 0.0, res, margin).ok)
    throw AssumptionViolation(map.name() + ": AS4 fails on the unit box");
  double kappa = kappa_max;
  for (int k = 0; k <= 10; ++k, kappa *= 0.5)
    if (check_as4(map, kappa, res, margin).ok) return kappa;
  throw AssumptionViolation(map.name() + ": AS4 fails even at kappa_max / 2^10");
}

/// Largest eps in {1/2, 1/4, ...} with min_i f_i(x) >= 1 + tol at every
/// vertex of eps * Delta (sampled on a lattice of the given resolution).
inline double find_epsilon(const KolmogorovMap& map, double tol = 0.01, int res = 0) {
  if (res <= 0) res = default_box_resolution(map.dim());
  const BarycentricGrid grid(map.dim(), res);
  double eps = 0.5;
  for (int k = 1; k <= 40; ++k, eps *= 0.5) {
    bool ok = true;
    for (const Vec& u : grid.vertices()) {
      if (eval_f(map, eps * u).minCoeff() < 1.0 + tol) {
        ok = false;
        break;
      }
    }
    if (ok) return eps;
  }
  throw AssumptionViolation(map.name() + ": no eps in 40 halvings makes the origin repelling");
}

struct AssumptionReport {
  As2Result as2;
  As3Result as3;
  As4Result as4;  ///< at the chosen kappa, or at kappa = 0 when none exists
  std::optional<double> kappa;
  std::optional<double> epsilon;
  int grid_resolution = 0;
  std::vector<std::string> notes;

  bool all_ok() const {
    return as2.ok && as3.mode != As3Mode::fail && as4.ok && kappa.has_value() && epsilon.has_value();
  }
};

struct CheckOptions {
  int resolution = 0;  ///< points per edge; 0 picks the per-dimension default
  double kappa_max = 1.0;
  double as2_tol = 1e-12;
  double epsilon_tol = 0.01;
  double margin = kDefaultSafetyMargin;
};

/// Full battery: AS2, AS4 on the unit box, kappa, AS3 on Lambda, epsilon.
inline AssumptionReport check_assumptions(const KolmogorovMap& map, const CheckOptions& opt = {}) {
  AssumptionReport rep;
  rep.grid_resolution = opt.resolution > 0 ? opt.resolution : default_box_resolution(map.dim());
  const int res = rep.grid_resolution;
  rep.as2 = check_as2(map, opt.as2_tol);
  if (!rep.as2.ok) rep.notes.push_back("AS2: f_i(e_i) deviates from 1");

  rep.as4 = check_as4(map, 0.0, res, opt.margin);
  if (rep.as4.ok) {
    try {
      rep.kappa = find_kappa(map, res, opt.kappa_max, opt.margin);
      rep.as4 = check_as4(map, *rep.kappa, res, opt.margin);
    } catch (const AssumptionViolation& e) {
      rep.notes.push_back(e.what());
    }
  } else {
    rep.notes.push_back("AS4: rho(Z(x)) >= 1 - margin on the unit box");
  }

  rep.as3 = check_as3(map, 1.0 + rep.kappa.value_or(0.0), res);
  if (rep.as3.mode == As3Mode::fail) rep.notes.push_back("AS3: " + rep.as3.reason);

  if (rep.as2.ok && rep.as3.mode != As3Mode::fail) {
    try {
      rep.epsilon = find_epsilon(map, opt.epsilon_tol);
    } catch (const AssumptionViolation& e) {
      rep.notes.push_back(e.what());
    }
  }
  return rep;
}

}  // namespace carsim
