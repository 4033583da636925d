#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace carsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the domain of an operation (negative point, zero vector, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The map violates one of its standing hypotheses at an evaluated point.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// The radial projection of an image manifold is no longer injective.
class FoldError : public Error {
 public:
  using Error::Error;
};

/// A target direction is not covered by any image cell.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// A manifold or image left the trapping box.
class TrappingError : public Error {
 public:
  using Error::Error;
};

/// Two manifolds (or a manifold and a file) live on different grids.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// An orbit left the configured safety box.
class EscapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace carsim
