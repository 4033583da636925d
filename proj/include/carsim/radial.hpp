#pragma once

// Manifolds given by a positive radial function R over the simplex:
// S = { R(u) u : u in Delta }, with R piecewise linear over a BarycentricGrid.

#include "carsim/metrics.hpp"
#include "carsim/simplex_grid.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace carsim {

using GridPtr = std::shared_ptr<const BarycentricGrid>;

inline GridPtr make_grid(int dim, int resolution) {
  return std::make_shared<const BarycentricGrid>(dim, resolution);
}

enum class Provenance { seed, lower, upper, sigma };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::seed: return "seed";
    case Provenance::lower: return "lower";
    case Provenance::upper: return "upper";
    case Provenance::sigma: return "sigma";
  }
  return "unknown";
}

class RadialManifold {
 public:
  RadialManifold(GridPtr grid, std::vector<double> radii, Provenance provenance = Provenance::seed,
                 int iteration = 0)
      : grid_(std::move(grid)), radii_(std::move(radii)), provenance_(provenance), iteration_(iteration) {
    if (!grid_) throw DomainError("RadialManifold: null grid");
    if (radii_.size() != grid_->size())
      throw GridMismatch("RadialManifold: " + std::to_string(radii_.size()) + " radii for " +
                         std::to_string(grid_->size()) + " grid vertices");
    for (double r : radii_)
      if (!std::isfinite(r) || r <= 0.0) throw DomainError("RadialManifold: radii must be positive and finite");
  }

  const BarycentricGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int dim() const { return grid_->dim(); }
  std::size_t size() const { return radii_.size(); }

  const std::vector<double>& radii() const { return radii_; }
  double radius(std::size_t i) const { return radii_[i]; }
  /// R(u_i) u_i
  Vec point(std::size_t i) const { return radii_[i] * grid_->vertex(i); }

  Provenance provenance() const { return provenance_; }
  int iteration() const { return iteration_; }

  /// R(u), piecewise-linear over the containing cell; exact at vertices.
  double radius_at(const Vec& u) const {
    const CellLocation loc = grid_->locate(u);
    double r = 0.0;
    for (std::size_t j = 0; j < loc.vertices.size(); ++j) r += loc.weights[j] * radii_[loc.vertices[j]];
    return r;
  }

  /// R(u) u
  Vec eval(const Vec& u) const { return radius_at(u) * u; }

  std::vector<Vec> vertex_cloud() const {
    std::vector<Vec> out;
    out.reserve(radii_.size());
    for (std::size_t i = 0; i < radii_.size(); ++i) out.push_back(point(i));
    return out;
  }

 private:
  GridPtr grid_;
  std::vector<double> radii_;
  Provenance provenance_;
  int iteration_;
};

/// R = c everywhere, i.e. the scaled simplex c * Delta.
inline RadialManifold scaled_simplex(GridPtr grid, double c, Provenance p = Provenance::seed) {
  const std::size_t n = grid->size();
  return RadialManifold(std::move(grid), std::vector<double>(n, c), p);
}

/// Relative boundary of the box [0, a]^d: R(u) = a / |u|_inf.
inline RadialManifold box_boundary_manifold(GridPtr grid, double a, Provenance p = Provenance::seed) {
  if (!(a > 0.0)) throw DomainError("box_boundary_manifold: side must be positive");
  std::vector<double> radii(grid->size());
  for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = a / grid->vertex(i).maxCoeff();
  return RadialManifold(std::move(grid), std::move(radii), p);
}

inline void require_same_grid(const RadialManifold& a, const RadialManifold& b) {
  if (!a.grid().same_as(b.grid())) throw GridMismatch("manifolds live on different grids");
}

/// max_u |R(u) - R'(u)| over grid vertices.
inline double sup_gap(const RadialManifold& a, const RadialManifold& b) {
  require_same_grid(a, b);
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a.radius(i) - b.radius(i)));
  return gap;
}

namespace detail {

/// Calls fn(i, j) for every lattice edge (neighbours differ by e_p - e_q / m).
template <class Fn>
void for_each_lattice_edge(const BarycentricGrid& grid, Fn&& fn) {
  const int d = grid.dim();
  std::vector<int> k(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto base = grid.lattice(i);
    for (int p = 0; p < d; ++p) {
      for (int q = 0; q < d; ++q) {
        if (p == q || base[static_cast<std::size_t>(q)] == 0) continue;
        std::copy(base.begin(), base.end(), k.begin());
        ++k[static_cast<std::size_t>(p)];
        --k[static_cast<std::size_t>(q)];
        if (auto j = grid.find_vertex(k); j && *j > i) fn(i, *j);
      }
    }
  }
}

}  // namespace detail

/// Empirical Lipschitz constant of R: max over lattice edges of |dR| / |du|.
inline double lipschitz_estimate(const RadialManifold& s) {
  double best = 0.0;
  const double h = s.grid().spacing();
  if (h == 0.0) return 0.0;
  detail::for_each_lattice_edge(s.grid(), [&](std::size_t i, std::size_t j) {
    best = std::max(best, std::abs(s.radius(i) - s.radius(j)) / h);
  });
  return best;
}

/// Scale below which order relations between vertex points are not
/// resolvable: 2 * L * h with L the empirical Lipschitz constant of R.
inline double order_tolerance(const RadialManifold& s) {
  return 2.0 * lipschitz_estimate(s) * s.grid().spacing();
}

/// A-posteriori estimate of the piecewise-linear interpolation error of R:
/// half the largest second difference along lattice lines.
inline double interpolation_error_estimate(const RadialManifold& s) {
  const auto& grid = s.grid();
  const int d = grid.dim();
  if (d == 1) return 0.0;
  double worst = 0.0;
  std::vector<int> fwd(static_cast<std::size_t>(d)), bwd(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto base = grid.lattice(i);
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        if (base[static_cast<std::size_t>(p)] == 0 || base[static_cast<std::size_t>(q)] == 0) continue;
        std::copy(base.begin(), base.end(), fwd.begin());
        std::copy(base.begin(), base.end(), bwd.begin());
        ++fwd[static_cast<std::size_t>(p)];
        --fwd[static_cast<std::size_t>(q)];
        --bwd[static_cast<std::size_t>(p)];
        ++bwd[static_cast<std::size_t>(q)];
        auto a = grid.find_vertex(fwd);
        auto b = grid.find_vertex(bwd);
        if (!a || !b) continue;
        worst = std::max(worst, std::abs(s.radius(*a) - 2.0 * s.radius(i) + s.radius(*b)));
      }
    }
  }
  return 0.5 * worst;
}

struct OrderViolation {
  std::size_t lower;  ///< vertex whose point is dominated
  std::size_t upper;
  double margin;      ///< min over the support of (upper - lower) coordinates
};

/// Pairs of vertices with equal support whose points are strictly ordered
/// (every support coordinate larger by more than tol).
inline std::vector<OrderViolation> order_violations(const RadialManifold& s, double tol) {
  std::vector<OrderViolation> out;
  const auto cloud = s.vertex_cloud();
  std::vector<SupportIndex> supp(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) supp[i] = support(s.grid().vertex(i));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.size(); ++j) {
      if (!(supp[i] == supp[j])) continue;
      double up = std::numeric_limits<double>::infinity();
      double down = std::numeric_limits<double>::infinity();
      for (int c = 0; c < s.dim(); ++c) {
        if (!supp[i].contains(c)) continue;
        up = std::min(up, cloud[j][c] - cloud[i][c]);
        down = std::min(down, cloud[i][c] - cloud[j][c]);
      }
      if (up > tol) out.push_back({i, j, up});
      if (down > tol) out.push_back({j, i, down});
    }
  }
  return out;
}

inline bool is_weakly_unordered(const RadialManifold& s, double tol) {
  return order_violations(s, tol).empty();
}

}  // namespace carsim
