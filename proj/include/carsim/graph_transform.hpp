#pragma once

// One step of the graph transform: push every vertex of a radial manifold
// through F, then re-express the image as a radial function on a grid.
//
// Resampling treats the source manifold as the piecewise-linear surface
// through its vertex points. For a target direction w we find a source cell
// whose image tile contains w and solve T(F(R(u) u)) = w for u inside that
// cell by Newton's method (R is linear on the cell), so the new radius is
// |F(R(u) u)|_1 for the exact preimage direction u.

#include "carsim/kolmo_map.hpp"
#include "carsim/metrics.hpp"
#include "carsim/radial.hpp"

#include <boost/math/tools/roots.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace carsim {

inline constexpr double kBoxTolerance = 1e-9;

struct PushforwardCloud {
  KolmogorovMap map;
  RadialManifold source;
  std::vector<Vec> images;      ///< y_j = F(R(u_j) u_j)
  std::vector<Vec> directions;  ///< v_j = T(y_j)
  std::vector<double> radii;    ///< r_j = |y_j|_1
};

namespace detail {

inline bool inside_box(const Vec& x, double upper) {
  return x.maxCoeff() <= upper + kBoxTolerance;
}

}  // namespace detail

/// Images of all vertex points of S. When box_upper is given, both S and
/// its image must stay within [0, box_upper]^d (up to 1e-9).
inline PushforwardCloud pushforward(const KolmogorovMap& map, const RadialManifold& s,
                                    std::optional<double> box_upper = std::nullopt) {
  if (map.dim() != s.dim()) throw DomainError("pushforward: map and manifold dimensions differ");
  PushforwardCloud out{map, s, {}, {}, {}};
  out.images.reserve(s.size());
  out.directions.reserve(s.size());
  out.radii.reserve(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    const Vec x = s.point(j);
    if (box_upper && !detail::inside_box(x, *box_upper))
      throw TrappingError("pushforward: manifold point leaves the trapping box");
    Vec y = eval_F(map, x);
    const double r = y.sum();
    if (!(r > 0.0)) throw AssumptionViolation("pushforward: F maps a nonzero point to 0");
    if (box_upper && !detail::inside_box(y, *box_upper))
      throw TrappingError("pushforward: image leaves the trapping box; kappa is not trapping");
    Vec v = y / r;
    if (support(v) != support(s.grid().vertex(j)))
      throw AssumptionViolation("pushforward: image left its coordinate face");
    out.images.push_back(std::move(y));
    out.directions.push_back(std::move(v));
    out.radii.push_back(r);
  }
  return out;
}

struct ResampleOptions {
  double degenerate_volume = 1e-14;  ///< |signed volume| below this is degenerate
  double weight_slack = 1e-9;        ///< accepted negativity of solved weights
  double candidate_slack = 0.25;     ///< image barycentric slack for first-pass candidates
  int newton_max_iter = 60;
};

namespace detail {

/// Signed volume (up to the constant 1/k!) of the simplex with the given
/// points, measured in the first k = d - 1 coordinates.
inline double signed_volume(std::span<const Vec> pts) {
  const int k = static_cast<int>(pts.size()) - 1;
  if (k == 0) return 1.0;
  Mat m(k, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) m(i, j) = pts[static_cast<std::size_t>(j + 1)][i] - pts[0][i];
  return m.determinant();
}

/// Barycentric coordinates of w with respect to a simplex of directions,
/// using the first k coordinates. Empty result for a singular simplex.
inline std::vector<double> barycentric(std::span<const Vec> pts, const Vec& w) {
  const int k = static_cast<int>(pts.size()) - 1;
  if (k == 0) return {1.0};
  Mat m(k, k);
  Vec rhs(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) m(i, j) = pts[static_cast<std::size_t>(j + 1)][i] - pts[0][i];
    rhs[i] = w[i] - pts[0][i];
  }
  Eigen::FullPivLU<Mat> lu(m);
  if (!lu.isInvertible()) return {};
  const Vec lam = lu.solve(rhs);
  std::vector<double> out(static_cast<std::size_t>(k + 1));
  out[0] = 1.0 - lam.sum();
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j + 1)] = lam[j];
  return out;
}

struct CellSolve {
  bool converged = false;
  double radius = 0.0;
  double min_weight = -std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
};

/// Solves T(F(R(u) u)) = w for u in the given source cell, restricted to the
/// cell vertices whose support lies inside the support of w.
inline CellSolve solve_in_cell(const PushforwardCloud& cloud, std::span<const std::size_t> cell,
                               const Vec& w, const std::vector<double>& init, int max_iter) {
  const auto& grid = cloud.source.grid();
  const SupportIndex target = support(w);
  std::vector<std::size_t> active;
  std::vector<double> beta;
  for (std::size_t j = 0; j < cell.size(); ++j) {
    if (!target.includes(support(grid.vertex(cell[j])))) continue;
    active.push_back(cell[j]);
    beta.push_back(j < init.size() ? std::max(0.0, init[j]) : 0.0);
  }
  CellSolve out;
  if (active.empty()) return out;
  double total = 0.0;
  for (double b : beta) total += b;
  if (!(total > 0.0)) std::fill(beta.begin(), beta.end(), 1.0 / static_cast<double>(beta.size()));
  else for (double& b : beta) b /= total;

  const int d = cloud.source.dim();
  const int a = static_cast<int>(active.size());
  auto state = [&](const std::vector<double>& bw, Vec& u, double& r, Vec& x, Vec& y) {
    u = Vec::Zero(d);
    r = 0.0;
    for (int j = 0; j < a; ++j) {
      u += bw[static_cast<std::size_t>(j)] * grid.vertex(active[static_cast<std::size_t>(j)]);
      r += bw[static_cast<std::size_t>(j)] * cloud.source.radius(active[static_cast<std::size_t>(j)]);
    }
    x = (r * u).cwiseMax(0.0);
    y = eval_F(cloud.map, x);
  };
  auto residual_of = [&](const Vec& y) { return (y / y.sum() - w).lpNorm<Eigen::Infinity>(); };

  Vec u, x, y;
  double r = 0.0;
  state(beta, u, r, x, y);
  double res = residual_of(y);
  for (int it = 0; it < max_iter && a > 1 && res > 1e-15; ++it) {
    const double s = y.sum();
    const Vec t = y / s;
    const Mat df = eval_DF(cloud.map, x);
    Mat jac(d, a - 1);
    const Vec& u0 = grid.vertex(active[0]);
    const double r0 = cloud.source.radius(active[0]);
    for (int j = 1; j < a; ++j) {
      const Vec& uj = grid.vertex(active[static_cast<std::size_t>(j)]);
      const double rj = cloud.source.radius(active[static_cast<std::size_t>(j)]);
      const Vec dx = (rj - r0) * u + r * (uj - u0);
      const Vec dy = df * dx;
      jac.col(j - 1) = (dy - t * dy.sum()) / s;
    }
    const Vec delta = jac.completeOrthogonalDecomposition().solve(-(t - w));
    double step = 1.0;
    bool improved = false;
    std::vector<double> trial(beta.size());
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      double head = 0.0;
      for (int j = 1; j < a; ++j) {
        trial[static_cast<std::size_t>(j)] = beta[static_cast<std::size_t>(j)] + step * delta[j - 1];
        head += trial[static_cast<std::size_t>(j)];
      }
      trial[0] = 1.0 - head;
      Vec u2, x2, y2;
      double r2 = 0.0;
      state(trial, u2, r2, x2, y2);
      const double res2 = residual_of(y2);
      if (res2 < res) {
        beta = trial;
        u = u2;
        x = x2;
        y = y2;
        r = r2;
        res = res2;
        improved = true;
        break;
      }
    }
    if (!improved || step * delta.lpNorm<Eigen::Infinity>() < 1e-16) break;
  }
  out.converged = res <= 1e-12;
  out.radius = y.sum();
  out.residual = res;
  out.min_weight = *std::min_element(beta.begin(), beta.end());
  return out;
}

}  // namespace detail

/// Spatial index over the image tiles of a pushforward cloud, with the
/// orientation check that detects folds.
class ImageTiling {
 public:
  ImageTiling(const PushforwardCloud& cloud, ResampleOptions opt = {}) : cloud_(cloud), opt_(opt) {
    const auto& grid = cloud_.source.grid();
    const int d = grid.dim();
    if (d == 1) return;
    k_ = d - 1;
    bins_per_axis_ = std::max(1, grid.resolution());
    while (std::pow(static_cast<double>(bins_per_axis_), k_) > 2e5) bins_per_axis_ /= 2;
    std::size_t total = 1;
    for (int i = 0; i < k_; ++i) total *= static_cast<std::size_t>(bins_per_axis_);
    bins_.resize(total);
    degenerate_.assign(grid.cell_count(), false);

    std::vector<Vec> src(static_cast<std::size_t>(d)), img(static_cast<std::size_t>(d));
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
      const auto cell = grid.cell(c);
      for (int j = 0; j < d; ++j) {
        src[static_cast<std::size_t>(j)] = grid.vertex(cell[static_cast<std::size_t>(j)]);
        img[static_cast<std::size_t>(j)] = cloud_.directions[cell[static_cast<std::size_t>(j)]];
      }
      const double vs = detail::signed_volume(src);
      const double vi = detail::signed_volume(img);
      if (std::abs(vi) < opt_.degenerate_volume) {
        check_subdivided(cell);
        degenerate_[c] = true;
      } else if ((vi > 0.0) != (vs > 0.0)) {
        throw FoldError("resample: image cell " + std::to_string(c) + " has reversed orientation");
      }
      insert(c, img);
    }
  }

  /// Radius of the image surface in direction w.
  double radius_toward(const Vec& w) const {
    if (cloud_.source.dim() == 1) return cloud_.radii[0];
    const auto& grid = cloud_.source.grid();
    const auto& cands = bins_[bin_of(w)];

    struct Cand {
      std::size_t cell;
      std::vector<double> bary;
      double score;
    };
    std::vector<Cand> ranked;
    std::vector<Vec> img(static_cast<std::size_t>(k_ + 1));
    for (std::size_t c : cands) {
      const auto cell = grid.cell(c);
      for (int j = 0; j <= k_; ++j) img[static_cast<std::size_t>(j)] = cloud_.directions[cell[static_cast<std::size_t>(j)]];
      auto bary = detail::barycentric(img, w);
      double score = -1.0;
      if (!bary.empty()) score = *std::min_element(bary.begin(), bary.end());
      else bary.assign(static_cast<std::size_t>(k_ + 1), 1.0 / (k_ + 1));
      if (score >= -opt_.candidate_slack || degenerate_[c]) ranked.push_back({c, std::move(bary), score});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.cell < b.cell;
    });
    for (const auto& cand : ranked) {
      const auto sol = detail::solve_in_cell(cloud_, grid.cell(cand.cell), w, cand.bary, opt_.newton_max_iter);
      if (sol.converged && sol.min_weight >= -opt_.weight_slack) return sol.radius;
    }
    // exhaustive fallback before giving up
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t best_cell = 0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
      const auto cell = grid.cell(c);
      for (int j = 0; j <= k_; ++j) img[static_cast<std::size_t>(j)] = cloud_.directions[cell[static_cast<std::size_t>(j)]];
      auto bary = detail::barycentric(img, w);
      if (bary.empty()) bary.assign(static_cast<std::size_t>(k_ + 1), 1.0 / (k_ + 1));
      const auto sol = detail::solve_in_cell(cloud_, cell, w, bary, opt_.newton_max_iter);
      if (sol.converged && sol.min_weight >= -opt_.weight_slack) return sol.radius;
      const double gap = sol.converged ? -sol.min_weight : sol.residual;
      if (gap < best_gap) {
        best_gap = gap;
        best_cell = c;
      }
    }
    throw CoverageError("resample: no image cell covers the target direction; nearest cell " +
                        std::to_string(best_cell) + " misses by " + std::to_string(best_gap));
  }

 private:
  std::size_t bin_index(const std::vector<int>& idx) const {
    std::size_t b = 0;
    for (int i = 0; i < k_; ++i) b = b * static_cast<std::size_t>(bins_per_axis_) + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
    return b;
  }

  int axis_bin(double v) const {
    return std::clamp(static_cast<int>(std::floor(v * bins_per_axis_)), 0, bins_per_axis_ - 1);
  }

  std::size_t bin_of(const Vec& w) const {
    std::vector<int> idx(static_cast<std::size_t>(k_));
    for (int i = 0; i < k_; ++i) idx[static_cast<std::size_t>(i)] = axis_bin(w[i]);
    return bin_index(idx);
  }

  void insert(std::size_t c, const std::vector<Vec>& img) {
    std::vector<int> lo(static_cast<std::size_t>(k_)), hi(static_cast<std::size_t>(k_));
    for (int i = 0; i < k_; ++i) {
      double mn = img[0][i], mx = img[0][i];
      for (const Vec& v : img) {
        mn = std::min(mn, v[i]);
        mx = std::max(mx, v[i]);
      }
      const double pad = 0.25 * (mx - mn) + 1e-12;
      lo[static_cast<std::size_t>(i)] = axis_bin(mn - pad);
      hi[static_cast<std::size_t>(i)] = axis_bin(mx + pad);
    }
    std::vector<int> idx = lo;
    while (true) {
      bins_[bin_index(idx)].push_back(c);
      int j = k_ - 1;
      while (j >= 0 && idx[static_cast<std::size_t>(j)] == hi[static_cast<std::size_t>(j)]) {
        idx[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
        --j;
      }
      if (j < 0) break;
      ++idx[static_cast<std::size_t>(j)];
    }
  }

  /// A degenerate image tile is split once by the resolution-2 lattice of
  /// the source cell; any sub-tile with reversed orientation is a fold.
  void check_subdivided(std::span<const std::size_t> cell) const {
    const auto& grid = cloud_.source.grid();
    const int d = grid.dim();
    const BarycentricGrid ref(d, 2);
    std::vector<Vec> src_pts(ref.size()), img_pts(ref.size());
    for (std::size_t p = 0; p < ref.size(); ++p) {
      const Vec& b = ref.vertex(p);
      Vec u = Vec::Zero(d);
      double r = 0.0;
      for (int j = 0; j < d; ++j) {
        u += b[j] * grid.vertex(cell[static_cast<std::size_t>(j)]);
        r += b[j] * cloud_.source.radius(cell[static_cast<std::size_t>(j)]);
      }
      src_pts[p] = u;
      const Vec y = eval_F(cloud_.map, (r * u).cwiseMax(0.0));
      img_pts[p] = y / y.sum();
    }
    std::vector<Vec> s(static_cast<std::size_t>(d)), m(static_cast<std::size_t>(d));
    for (std::size_t c = 0; c < ref.cell_count(); ++c) {
      const auto sub = ref.cell(c);
      for (int j = 0; j < d; ++j) {
        s[static_cast<std::size_t>(j)] = src_pts[sub[static_cast<std::size_t>(j)]];
        m[static_cast<std::size_t>(j)] = img_pts[sub[static_cast<std::size_t>(j)]];
      }
      const double vs = detail::signed_volume(s);
      const double vi = detail::signed_volume(m);
      if (std::abs(vi) >= opt_.degenerate_volume && (vi > 0.0) != (vs > 0.0))
        throw FoldError("resample: subdivided image cell has reversed orientation");
    }
  }

  const PushforwardCloud& cloud_;
  ResampleOptions opt_;
  int k_ = 0;
  int bins_per_axis_ = 1;
  std::vector<std::vector<std::size_t>> bins_;
  std::vector<bool> degenerate_;
};

/// Radial representation of the image surface on the target grid.
inline RadialManifold resample(const PushforwardCloud& cloud, GridPtr target,
                               const ResampleOptions& opt = {}) {
  if (!target || target->dim() != cloud.source.dim())
    throw GridMismatch("resample: target grid dimension differs from the cloud");
  const ImageTiling tiling(cloud, opt);
  std::vector<double> radii(target->size());
  for (std::size_t i = 0; i < target->size(); ++i) radii[i] = tiling.radius_toward(target->vertex(i));
  return RadialManifold(std::move(target), std::move(radii), cloud.source.provenance(),
                        cloud.source.iteration() + 1);
}

inline RadialManifold resample(const PushforwardCloud& cloud, const ResampleOptions& opt = {}) {
  return resample(cloud, cloud.source.grid_ptr(), opt);
}

/// Independent resampler for d = 2: for each target direction w, bisection
/// on the source parameter t (u = (1 - t, t)) solves T(F(R(u) u))_2 = w_2.
inline RadialManifold resample_bisection(const KolmogorovMap& map, const RadialManifold& source,
                                         GridPtr target) {
  if (source.dim() != 2 || map.dim() != 2 || !target || target->dim() != 2)
    throw DomainError("resample_bisection: planar maps only");
  auto image_at = [&](double t) {
    Vec u(2);
    u << 1.0 - t, t;
    return eval_F(map, source.radius_at(u) * u);
  };
  std::vector<double> radii(target->size());
  for (std::size_t i = 0; i < target->size(); ++i) {
    const Vec& w = target->vertex(i);
    if (w[1] == 0.0) {
      radii[i] = image_at(0.0).sum();
      continue;
    }
    if (w[0] == 0.0) {
      radii[i] = image_at(1.0).sum();
      continue;
    }
    auto g = [&](double t) {
      const Vec y = image_at(t);
      return y[1] / y.sum() - w[1];
    };
    const auto [lo, hi] = boost::math::tools::bisect(g, 0.0, 1.0, boost::math::tools::eps_tolerance<double>(52));
    radii[i] = image_at(0.5 * (lo + hi)).sum();
  }
  return RadialManifold(std::move(target), std::move(radii), source.provenance(), source.iteration() + 1);
}

/// resample(pushforward(S)) on S's grid. Radii whose points overshoot the
/// box by at most 1e-9 are pulled back onto its boundary.
inline RadialManifold graph_step(const KolmogorovMap& map, const RadialManifold& s,
                                 std::optional<double> box_upper = std::nullopt,
                                 const ResampleOptions& opt = {}) {
  const auto cloud = pushforward(map, s, box_upper);
  RadialManifold next = resample(cloud, opt);
  if (!box_upper) return next;
  std::vector<double> radii = next.radii();
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double reach = radii[i] * next.grid().vertex(i).maxCoeff();
    if (reach <= *box_upper) continue;
    if (reach > *box_upper + kBoxTolerance)
      throw TrappingError("graph_step: resampled manifold leaves the trapping box");
    radii[i] = *box_upper / next.grid().vertex(i).maxCoeff();
  }
  return RadialManifold(next.grid_ptr(), std::move(radii), next.provenance(), next.iteration());
}

}  // namespace carsim
