#pragma once

// Pointwise geometry on the first orthant: supports, radial projection,
// order function, Harnack metric, projection along e, Hausdorff distance.

#include "carsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace carsim {

/// Subset of {0, ..., d-1} stored as a bitmask.
struct SupportIndex {
  std::uint32_t mask = 0;

  bool contains(int i) const { return (mask >> i) & 1u; }
  bool empty() const { return mask == 0; }
  bool operator==(const SupportIndex&) const = default;
  /// J is a subset of this.
  bool includes(SupportIndex j) const { return (j.mask & ~mask) == 0; }

  static SupportIndex full(int dim) { return {dim >= 32 ? ~0u : (1u << dim) - 1u}; }
};

inline SupportIndex support(const Vec& x) {
  SupportIndex s;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) s.mask |= 1u << i;
  return s;
}

/// pi_I: zero every coordinate outside I.
inline Vec mask(const Vec& x, SupportIndex set) {
  Vec out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!set.contains(static_cast<int>(i))) out[i] = 0.0;
  return out;
}

/// T(x) = x / |x|_1.
inline Vec radial_project(const Vec& x) {
  if ((x.array() < 0.0).any()) throw DomainError("radial_project: point outside the orthant");
  const double norm = x.sum();
  if (!(norm > 0.0)) throw DomainError("radial_project: zero vector has no direction");
  return x / norm;
}

/// lambda(x, y) = sup{l >= 0 : y - l x >= 0} = min_{x_i > 0} y_i / x_i; +inf iff x = 0.
inline double order_function(const Vec& x, const Vec& y) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) best = std::min(best, y[i] / x[i]);
  return best;
}

/// mu(x, y) = min(lambda(x, y), lambda(y, x)).
inline double symmetrized_order(const Vec& x, const Vec& y) {
  return std::min(order_function(x, y), order_function(y, x));
}

/// Harnack metric h = 1 - mu on nonzero points of the orthant.
inline double harnack(const Vec& x, const Vec& y) {
  if (!(x.sum() > 0.0) || !(y.sum() > 0.0)) throw DomainError("harnack: zero argument");
  return 1.0 - symmetrized_order(x, y);
}

inline double restricted_harnack(const Vec& x, const Vec& y, SupportIndex set) {
  const Vec px = mask(x, set);
  const Vec py = mask(y, set);
  if (!(px.sum() > 0.0) || !(py.sum() > 0.0))
    throw DomainError("restricted_harnack: masked point is zero");
  return harnack(px, py);
}

/// Orthogonal projection onto the hyperplane perpendicular to e = (1, ..., 1).
inline Vec project_e_perp(const Vec& x) {
  return x.array() - x.sum() / static_cast<double>(x.size());
}

/// Symmetric Hausdorff distance between finite point sets (Euclidean norm),
/// brute force over all pairs.
inline double hausdorff_points(std::span<const Vec> a, std::span<const Vec> b) {
  if (a.empty() || b.empty()) throw DomainError("hausdorff_points: empty point set");
  auto directed = [](std::span<const Vec> from, std::span<const Vec> to) {
    double worst = 0.0;
    for (const Vec& p : from) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const Vec& q : to) {
        nearest = std::min(nearest, (p - q).squaredNorm());
        if (nearest <= worst) break;  // cannot raise the max any more
      }
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

}  // namespace carsim
