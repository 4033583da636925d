#pragma once

// Kolmogorov maps F = diag[x] f(x) on the closed first orthant.

#include "carsim/types.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace carsim {

using PerCapita = std::function<Vec(const Vec&)>;
using PerCapitaJacobian = std::function<Mat(const Vec&)>;

/// A named Kolmogorov map together with its per-capita rate f and,
/// optionally, the analytic Jacobian Df. Immutable after construction.
class KolmogorovMap {
 public:
  KolmogorovMap(std::string name, int dim,
                std::vector<std::pair<std::string, double>> params, PerCapita f,
                PerCapitaJacobian df = {})
      : name_(std::move(name)),
        dim_(dim),
        params_(std::move(params)),
        f_(std::move(f)),
        df_(std::move(df)) {
    if (dim_ < 1) throw DomainError("KolmogorovMap: dimension must be positive");
    if (!f_) throw DomainError("KolmogorovMap: per-capita rate is empty");
  }

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  const std::vector<std::pair<std::string, double>>& params() const { return params_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(df_); }

  // Raw access; prefer the checked eval_* functions below.
  Vec raw_f(const Vec& x) const { return f_(x); }
  Mat raw_df(const Vec& x) const { return df_(x); }

 private:
  std::string name_;
  int dim_;
  std::vector<std::pair<std::string, double>> params_;
  PerCapita f_;
  PerCapitaJacobian df_;
};

namespace detail {

inline void check_point(const KolmogorovMap& map, const Vec& x) {
  if (x.size() != map.dim())
    throw DomainError(map.name() + ": point has dimension " + std::to_string(x.size()) +
                      ", expected " + std::to_string(map.dim()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw DomainError(map.name() + ": non-finite input");
    if (x[i] < 0.0) throw DomainError(map.name() + ": point outside the first orthant");
  }
}

}  // namespace detail

/// Per-capita growth rates f(x); every component finite and strictly positive.
inline Vec eval_f(const KolmogorovMap& map, const Vec& x) {
  detail::check_point(map, x);
  Vec fx = map.raw_f(x);
  for (Eigen::Index i = 0; i < fx.size(); ++i) {
    if (!std::isfinite(fx[i]) || fx[i] <= 0.0)
      throw AssumptionViolation(map.name() + ": f has a non-positive or non-finite component");
  }
  return fx;
}

/// F(x) = x_i f_i(x). Coordinate faces are preserved exactly.
inline Vec eval_F(const KolmogorovMap& map, const Vec& x) {
  return x.cwiseProduct(eval_f(map, x));
}

/// Central differences of f with step 1e-5 (1 + |x_j|); one-sided (forward)
/// where the backward node would leave the orthant.
inline Mat finite_difference_df(const KolmogorovMap& map, const Vec& x) {
  detail::check_point(map, x);
  const int d = map.dim();
  Mat jac(d, d);
  for (int j = 0; j < d; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(x[j]));
    Vec hi = x;
    hi[j] += h;
    if (x[j] - h >= 0.0) {
      Vec lo = x;
      lo[j] -= h;
      jac.col(j) = (map.raw_f(hi) - map.raw_f(lo)) / (2.0 * h);
    } else {
      // second-order forward stencil keeps the error at O(h^2) on faces
      Vec hi2 = x;
      hi2[j] += 2.0 * h;
      jac.col(j) = (-3.0 * map.raw_f(x) + 4.0 * map.raw_f(hi) - map.raw_f(hi2)) / (2.0 * h);
    }
  }
  return jac;
}

/// Df(x): analytic when available, finite differences otherwise.
inline Mat eval_df(const KolmogorovMap& map, const Vec& x) {
  if (!map.has_analytic_jacobian()) return finite_difference_df(map, x);
  detail::check_point(map, x);
  return map.raw_df(x);
}

/// DF(x) = diag[f(x)] + diag[x] Df(x).
inline Mat eval_DF(const KolmogorovMap& map, const Vec& x) {
  const Vec fx = eval_f(map, x);
  Mat jac = x.asDiagonal() * eval_df(map, x);
  jac.diagonal() += fx;
  return jac;
}

/// Z_ij(x) = -x_i (df_i/dx_j)(x) / f_i(x), formed directly from f and Df.
/// Rows with x_i = 0 vanish. Small negative entries (finite-difference noise)
/// are clamped to zero; larger ones signal Df having a positive entry.
inline Mat eval_Z(const KolmogorovMap& map, const Vec& x) {
  const Vec fx = eval_f(map, x);
  const Mat df = eval_df(map, x);
  const int d = map.dim();
  const double noise = map.has_analytic_jacobian() ? 1e-12 : 1e-7;
  Mat z(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double zij = x[i] == 0.0 ? 0.0 : -x[i] * df(i, j) / fx[i];
      if (zij < 0.0) {
        if (zij < -noise * (1.0 + std::abs(x[i])))
          throw AssumptionViolation(map.name() + ": Z(x) has a negative entry (Df has a positive entry)");
        zij = 0.0;
      }
      z(i, j) = zij;
    }
  }
  return z;
}

/// Restriction of F to the i-th axis: g(s) = f_i(s e_i), G(s) = s g(s).
class AxisMap {
 public:
  AxisMap(KolmogorovMap map, int index) : map_(std::move(map)), index_(index) {
    if (index_ < 0 || index_ >= map_.dim()) throw DomainError("axis_map: index out of range");
  }

  int index() const { return index_; }

  double g(double s) const { return eval_f(map_, embed(s))[index_]; }
  double G(double s) const { return s * g(s); }
  /// G'(s) = g(s) + s g'(s), the (i,i) entry of DF on the axis.
  double dG(double s) const { return eval_DF(map_, embed(s))(index_, index_); }

 private:
  Vec embed(double s) const {
    Vec x = Vec::Zero(map_.dim());
    x[index_] = s;
    return x;
  }

  KolmogorovMap map_;
  int index_;
};

/// Zero-based axis index.
inline AxisMap axis_map(const KolmogorovMap& map, int index) { return AxisMap(map, index); }

/// n-th iterate F^n(x).
inline Vec iterate_F(const KolmogorovMap& map, Vec x, int n) {
  for (int k = 0; k < n; ++k) x = eval_F(map, x);
  return x;
}

}  // namespace carsim
