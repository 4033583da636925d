#pragma once

// Built-in example maps and construction from a parameter block.

#include "carsim/kolmo_map.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace carsim {

/// d = 1, f(x) = 2 / (1 + x).
inline KolmogorovMap beverton_holt() {
  return KolmogorovMap(
      "beverton_holt", 1, {},
      [](const Vec& x) {
        Vec f(1);
        f[0] = 2.0 / (1.0 + x[0]);
        return f;
      },
      [](const Vec& x) {
        Mat df(1, 1);
        df(0, 0) = -2.0 / ((1.0 + x[0]) * (1.0 + x[0]));
        return df;
      });
}

/// d = 1, f(x) = lambda + 2 (1 - lambda) / (1 + x).
inline KolmogorovMap atkinson_allen(double lambda) {
  return KolmogorovMap(
      "atkinson_allen", 1, {{"lambda", lambda}},
      [lambda](const Vec& x) {
        Vec f(1);
        f[0] = lambda + 2.0 * (1.0 - lambda) / (1.0 + x[0]);
        return f;
      },
      [lambda](const Vec& x) {
        Mat df(1, 1);
        df(0, 0) = -2.0 * (1.0 - lambda) / ((1.0 + x[0]) * (1.0 + x[0]));
        return df;
      });
}

/// d = 1, f(x) = exp(lambda (1 - x)).
inline KolmogorovMap ricker1d(double lambda) {
  return KolmogorovMap(
      "ricker1d", 1, {{"lambda", lambda}},
      [lambda](const Vec& x) {
        Vec f(1);
        f[0] = std::exp(lambda * (1.0 - x[0]));
        return f;
      },
      [lambda](const Vec& x) {
        Mat df(1, 1);
        df(0, 0) = -lambda * std::exp(lambda * (1.0 - x[0]));
        return df;
      });
}

/// Planar Ricker competition: f = (exp(r(1 - x - a y)), exp(s(1 - y - b x))).
inline KolmogorovMap ricker2d(double r, double s, double a, double b) {
  return KolmogorovMap(
      "ricker2d", 2, {{"r", r}, {"s", s}, {"a", a}, {"b", b}},
      [=](const Vec& x) {
        Vec f(2);
        f[0] = std::exp(r * (1.0 - x[0] - a * x[1]));
        f[1] = std::exp(s * (1.0 - x[1] - b * x[0]));
        return f;
      },
      [=](const Vec& x) {
        const double f1 = std::exp(r * (1.0 - x[0] - a * x[1]));
        const double f2 = std::exp(s * (1.0 - x[1] - b * x[0]));
        Mat df(2, 2);
        df << -r * f1, -a * r * f1,
              -s * b * f2, -s * f2;
        return df;
      });
}

/// Leslie-Gower competition: f_i(x) = (1 + r_i) / (1 + (A x)_i).
/// Axis fixed points sit at e_i exactly when A_ii = r_i.
inline KolmogorovMap leslie_gower(const Vec& r, const Mat& A) {
  const auto d = r.size();
  if (d < 1 || A.rows() != d || A.cols() != d)
    throw DomainError("leslie_gower: r must be a d-vector and A a d x d matrix");
  if ((r.array() <= 0.0).any() || (A.array() < 0.0).any())
    throw DomainError("leslie_gower: r must be positive and A nonnegative");
  std::vector<std::pair<std::string, double>> params;
  for (Eigen::Index i = 0; i < d; ++i) params.emplace_back("r" + std::to_string(i + 1), r[i]);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      params.emplace_back("A" + std::to_string(i + 1) + std::to_string(j + 1), A(i, j));
  return KolmogorovMap(
      "leslie_gower", static_cast<int>(d), std::move(params),
      [r, A](const Vec& x) -> Vec {
        return (1.0 + r.array()) / (1.0 + (A * x).array());
      },
      [r, A](const Vec& x) -> Mat {
        const Eigen::ArrayXd denom = 1.0 + (A * x).array();
        const Eigen::ArrayXd scale = -(1.0 + r.array()) / denom.square();
        return scale.matrix().asDiagonal() * A;
      });
}

/// Parameter block of a map specification: scalars, vectors or row-major matrices.
using ParamValue = std::variant<double, std::vector<double>, std::vector<std::vector<double>>>;

struct MapSpec {
  std::string name;
  std::optional<int> dim;
  std::map<std::string, ParamValue> params;
};

namespace detail {

inline double scalar_param(const MapSpec& spec, const std::string& key,
                           std::optional<double> fallback = std::nullopt) {
  auto it = spec.params.find(key);
  if (it == spec.params.end()) {
    if (fallback) return *fallback;
    throw ConfigError(spec.name + ": missing parameter '" + key + "'");
  }
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  throw ConfigError(spec.name + ": parameter '" + key + "' must be a number");
}

inline Vec vector_param(const MapSpec& spec, const std::string& key) {
  auto it = spec.params.find(key);
  if (it == spec.params.end()) throw ConfigError(spec.name + ": missing parameter '" + key + "'");
  const auto* v = std::get_if<std::vector<double>>(&it->second);
  if (!v) throw ConfigError(spec.name + ": parameter '" + key + "' must be an array of numbers");
  return Eigen::Map<const Vec>(v->data(), static_cast<Eigen::Index>(v->size()));
}

inline Mat matrix_param(const MapSpec& spec, const std::string& key) {
  auto it = spec.params.find(key);
  if (it == spec.params.end()) throw ConfigError(spec.name + ": missing parameter '" + key + "'");
  const auto* rows = std::get_if<std::vector<std::vector<double>>>(&it->second);
  if (!rows || rows->empty())
    throw ConfigError(spec.name + ": parameter '" + key + "' must be a nested array (row-major)");
  const auto n = rows->size();
  const auto m = rows->front().size();
  Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    if ((*rows)[i].size() != m) throw ConfigError(spec.name + ": ragged matrix '" + key + "'");
    for (std::size_t j = 0; j < m; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*rows)[i][j];
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> registered_maps() {
  return {"beverton_holt", "atkinson_allen", "ricker1d", "ricker2d", "leslie_gower"};
}

/// Builds a registered map; throws ConfigError on unknown names, missing
/// parameters, or a declared dimension that disagrees with the map.
inline KolmogorovMap make_map(const MapSpec& spec) {
  auto built = [&]() -> KolmogorovMap {
    if (spec.name == "beverton_holt") return beverton_holt();
    if (spec.name == "atkinson_allen")
      return atkinson_allen(detail::scalar_param(spec, "lambda", 0.5));
    if (spec.name == "ricker1d") return ricker1d(detail::scalar_param(spec, "lambda"));
    if (spec.name == "ricker2d")
      return ricker2d(detail::scalar_param(spec, "r"), detail::scalar_param(spec, "s"),
                      detail::scalar_param(spec, "a"), detail::scalar_param(spec, "b"));
    if (spec.name == "leslie_gower") {
      try {
        return leslie_gower(detail::vector_param(spec, "r"), detail::matrix_param(spec, "A"));
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
    }
    throw ConfigError("unknown map '" + spec.name + "'");
  }();
  if (spec.dim && *spec.dim != built.dim())
    throw ConfigError(spec.name + ": declared dim " + std::to_string(*spec.dim) +
                      " but the map has dimension " + std::to_string(built.dim()));
  return built;
}

}  // namespace carsim
