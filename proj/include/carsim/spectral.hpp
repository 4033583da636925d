#pragma once

// Spectral radius of small dense matrices.

#include "carsim/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace carsim {

/// max |lambda| from a dense eigensolve.
inline double spectral_radius_dense(const Mat& m) {
  if (m.rows() != m.cols()) throw DomainError("spectral_radius: matrix is not square");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw Error("spectral_radius: eigensolve failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

struct PowerIterationResult {
  double rho = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration on M + I for a nonnegative M. The shift makes the Perron
/// root strictly dominant, so the iteration converges whenever the Perron
/// root is semisimple. Stops once the Collatz-Wielandt bracket
/// min_i (Bv)_i / v_i <= rho(B) <= max_i (Bv)_i / v_i is narrower than
/// rel_tol (components negligible against max v are ignored).
inline PowerIterationResult power_iteration(const Mat& m, int max_iter = 10000,
                                            double rel_tol = 1e-14) {
  if (m.rows() != m.cols()) throw DomainError("power_iteration: matrix is not square");
  if ((m.array() < 0.0).any()) throw DomainError("power_iteration: matrix has negative entries");
  const auto n = m.rows();
  PowerIterationResult out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  const Mat shifted = m + Mat::Identity(n, n);
  Vec v = Vec::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = shifted * v;
    const double vmax = v.maxCoeff();
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (v[i] <= 1e-12 * vmax) continue;
      const double ratio = w[i] / v[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    out.iterations = it;
    const double sum = w.sum();
    if (hi - lo <= rel_tol * hi) {
      out.rho = std::max(0.0, 0.5 * (lo + hi) - 1.0);
      out.converged = true;
      return out;
    }
    out.rho = std::max(0.0, sum - 1.0);
    v = w / sum;
  }
  return out;
}

/// Dense eigensolve for d <= 4 (and for matrices with negative entries);
/// power iteration otherwise, falling back to the eigensolve if it stalls.
inline double spectral_radius(const Mat& m) {
  if (m.rows() <= 4 || (m.array() < 0.0).any()) return spectral_radius_dense(m);
  const auto power = power_iteration(m);
  if (power.converged) return power.rho;
  return spectral_radius_dense(m);
}

}  // namespace carsim
