#pragma once

// Lattice discretization of the probability simplex.
//
// Vertices are u = k / m with k in N^d, sum k = m. Cells come from the
// Freudenthal (Kuhn) triangulation expressed in cumulative coordinates
// c_j = k_1 + ... + k_j, in which the simplex becomes the order region
// 0 <= c_1 <= ... <= c_{d-1} <= m. That region is an exact union of Kuhn
// simplices of the unit cube lattice, so the cells tile the simplex.

#include "carsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace carsim {

/// A point of the simplex expressed in one grid cell: vertex indices and
/// barycentric weights (both of length d).
struct CellLocation {
  std::vector<std::size_t> vertices;
  std::vector<double> weights;
};

class BarycentricGrid {
 public:
  BarycentricGrid(int dim, int resolution) : dim_(dim), res_(resolution) {
    if (dim_ < 1) throw DomainError("BarycentricGrid: dimension must be positive");
    if (res_ < 1) throw DomainError("BarycentricGrid: resolution must be positive");
    if (dim_ == 1) res_ = 1;
    build_vertices();
    build_cells();
  }

  int dim() const { return dim_; }
  int resolution() const { return res_; }
  std::size_t size() const { return vertices_.size(); }
  std::size_t cell_count() const { return dim_ == 1 ? 1 : cells_.size() / static_cast<std::size_t>(dim_); }

  const Vec& vertex(std::size_t i) const { return vertices_[i]; }
  const std::vector<Vec>& vertices() const { return vertices_; }

  /// Integer lattice coordinates k of vertex i (sum k = resolution).
  std::span<const int> lattice(std::size_t i) const {
    return {lattice_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  /// Vertex indices of cell c (d of them).
  std::span<const std::size_t> cell(std::size_t c) const {
    if (dim_ == 1) return {&zero_, 1};
    return {cells_.data() + c * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  std::optional<std::size_t> find_vertex(std::span<const int> k) const {
    if (k.size() != static_cast<std::size_t>(dim_)) return std::nullopt;
    int sum = 0;
    for (int v : k) {
      if (v < 0) return std::nullopt;
      sum += v;
    }
    if (sum != res_) return std::nullopt;
    std::vector<int> cum(static_cast<std::size_t>(dim_ - 1));
    int acc = 0;
    for (int j = 0; j + 1 < dim_; ++j) {
      acc += k[static_cast<std::size_t>(j)];
      cum[static_cast<std::size_t>(j)] = acc;
    }
    auto it = index_.find(encode(cum));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Index of the corner vertex e_i.
  std::size_t corner(int i) const {
    std::vector<int> k(static_cast<std::size_t>(dim_), 0);
    k[static_cast<std::size_t>(i)] = res_;
    return *find_vertex(k);
  }

  /// Euclidean distance between lattice neighbours (sqrt(2)/m); 0 for d = 1.
  double spacing() const { return dim_ == 1 ? 0.0 : std::sqrt(2.0) / res_; }

  bool same_as(const BarycentricGrid& other) const {
    return dim_ == other.dim_ && res_ == other.res_;
  }

  /// Locates u in a cell. Components may be negative or the sum may differ
  /// from 1 by at most 1e-12; anything further out is a DomainError.
  CellLocation locate(const Vec& u) const {
    if (u.size() != dim_) throw DomainError("locate: direction has the wrong dimension");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (!(u[i] >= -1e-12)) throw DomainError("locate: direction outside the simplex");
      sum += u[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError("locate: direction outside the simplex");
    if (dim_ == 1) return {{0}, {1.0}};

    const int k = dim_ - 1;
    std::vector<double> y(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += std::max(0.0, u[j]);
      y[static_cast<std::size_t>(j)] = std::clamp(acc * res_, 0.0, static_cast<double>(res_));
    }
    std::vector<int> z(static_cast<std::size_t>(k));
    std::vector<double> frac(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
      z[j] = std::min(static_cast<int>(std::floor(y[j])), res_ - 1);
      frac[j] = y[j] - z[j];
    }
    // Descending fractional part; ties broken by descending index so every
    // visited vertex stays inside the order region.
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) {
      const double fa = frac[static_cast<std::size_t>(a)];
      const double fb = frac[static_cast<std::size_t>(b)];
      if (fa != fb) return fa > fb;
      return a > b;
    });

    CellLocation loc;
    loc.vertices.reserve(static_cast<std::size_t>(dim_));
    loc.weights.reserve(static_cast<std::size_t>(dim_));
    std::vector<int> c = z;
    loc.vertices.push_back(index_of_cumulative(c));
    loc.weights.push_back(1.0 - frac[static_cast<std::size_t>(perm[0])]);
    for (int step = 0; step < k; ++step) {
      c[static_cast<std::size_t>(perm[static_cast<std::size_t>(step)])] += 1;
      loc.vertices.push_back(index_of_cumulative(c));
      const double next = step + 1 < k ? frac[static_cast<std::size_t>(perm[static_cast<std::size_t>(step + 1)])] : 0.0;
      loc.weights.push_back(frac[static_cast<std::size_t>(perm[static_cast<std::size_t>(step)])] - next);
    }
    return loc;
  }

 private:
  std::uint64_t encode(const std::vector<int>& cum) const {
    std::uint64_t key = 0;
    for (int c : cum) key = key * static_cast<std::uint64_t>(res_ + 1) + static_cast<std::uint64_t>(c);
    return key;
  }

  std::size_t index_of_cumulative(const std::vector<int>& cum) const {
    auto it = index_.find(encode(cum));
    if (it == index_.end()) throw Error("BarycentricGrid: point location left the lattice");
    return it->second;
  }

  void add_vertex(const std::vector<int>& cum) {
    const int k = dim_ - 1;
    const std::size_t idx = vertices_.size();
    Vec u(dim_);
    int prev = 0;
    for (int j = 0; j < k; ++j) {
      const int kj = cum[static_cast<std::size_t>(j)] - prev;
      lattice_.push_back(kj);
      u[j] = static_cast<double>(kj) / res_;
      prev = cum[static_cast<std::size_t>(j)];
    }
    lattice_.push_back(res_ - prev);
    u[k] = static_cast<double>(res_ - prev) / res_;
    vertices_.push_back(std::move(u));
    index_.emplace(encode(cum), idx);
  }

  void build_vertices() {
    const int k = dim_ - 1;
    if (k == 0) {
      add_vertex({});
      return;
    }
    // all nondecreasing sequences 0 <= c_1 <= ... <= c_k <= m, lexicographic
    std::vector<int> cum(static_cast<std::size_t>(k), 0);
    while (true) {
      add_vertex(cum);
      int j = k - 1;
      while (j >= 0 && cum[static_cast<std::size_t>(j)] == res_) --j;
      if (j < 0) break;
      ++cum[static_cast<std::size_t>(j)];
      for (int t = j + 1; t < k; ++t) cum[static_cast<std::size_t>(t)] = cum[static_cast<std::size_t>(j)];
    }
  }

  void build_cells() {
    const int k = dim_ - 1;
    if (k == 0) return;
    std::vector<int> z(static_cast<std::size_t>(k), 0);
    std::vector<int> perm(static_cast<std::size_t>(k));
    auto monotone = [&](const std::vector<int>& c) {
      for (int j = 0; j + 1 < k; ++j)
        if (c[static_cast<std::size_t>(j)] > c[static_cast<std::size_t>(j + 1)]) return false;
      return c[static_cast<std::size_t>(k - 1)] <= res_;
    };
    while (true) {
      std::iota(perm.begin(), perm.end(), 0);
      do {
        std::vector<int> c = z;
        std::vector<std::size_t> ids;
        bool ok = monotone(c);
        if (ok) ids.push_back(index_.at(encode(c)));
        for (int step = 0; ok && step < k; ++step) {
          c[static_cast<std::size_t>(perm[static_cast<std::size_t>(step)])] += 1;
          ok = monotone(c);
          if (ok) ids.push_back(index_.at(encode(c)));
        }
        if (ok) cells_.insert(cells_.end(), ids.begin(), ids.end());
      } while (std::next_permutation(perm.begin(), perm.end()));
      int j = k - 1;
      while (j >= 0 && z[static_cast<std::size_t>(j)] == res_ - 1) --j;
      if (j < 0) break;
      ++z[static_cast<std::size_t>(j)];
      for (int t = j + 1; t < k; ++t) z[static_cast<std::size_t>(t)] = 0;
    }
  }

  int dim_;
  int res_;
  std::vector<Vec> vertices_;
  std::vector<int> lattice_;
  std::vector<std::size_t> cells_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::size_t zero_ = 0;
};

/// Default lattice resolution for sampling a d-dimensional box.
inline int default_box_resolution(int dim) {
  if (dim <= 2) return 64;
  if (dim == 3) return 24;
  if (dim == 4) return 12;
  return 8;
}

}  // namespace carsim
