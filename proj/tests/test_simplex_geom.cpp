#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace carsim;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

Vec random_direction(std::mt19937_64& rng, int d) {
  std::exponential_distribution<double> e(1.0);
  Vec u(d);
  for (int i = 0; i < d; ++i) u[i] = e(rng);
  return u / u.sum();
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

/// Volume of a simplex in its (k = d - 1)-dimensional chart (first k coords).
double chart_volume(const BarycentricGrid& g, std::size_t c) {
  const auto cell = g.cell(c);
  const int k = g.dim() - 1;
  Mat m(k, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) m(i, j) = g.vertex(cell[static_cast<std::size_t>(j + 1)])[i] - g.vertex(cell[0])[i];
  return std::abs(m.determinant()) / factorial(k);
}

}  // namespace

TEST(BarycentricGrid, VertexCountsAndCorners) {
  for (int d = 1; d <= 4; ++d) {
    for (int m : {1, 2, 5, 8}) {
      const BarycentricGrid g(d, m);
      const int mm = g.resolution();
      // C(m + d - 1, d - 1)
      double expected = 1.0;
      for (int i = 1; i < d; ++i) expected = expected * (mm + i) / i;
      EXPECT_EQ(g.size(), static_cast<std::size_t>(std::llround(expected)));
      if (d > 1) EXPECT_EQ(g.cell_count(), static_cast<std::size_t>(std::llround(std::pow(mm, d - 1))));
      for (int i = 0; i < d; ++i) EXPECT_DOUBLE_EQ(g.vertex(g.corner(i))[i], 1.0);
      for (const Vec& u : g.vertices()) {
        EXPECT_GE(u.minCoeff(), 0.0);
        EXPECT_NEAR(u.sum(), 1.0, 1e-12);
      }
    }
  }
}

TEST(BarycentricGrid, CellsTileTheSimplex) {
  for (int d = 2; d <= 4; ++d) {
    const BarycentricGrid g(d, 6);
    double total = 0.0;
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      const double vol = chart_volume(g, c);
      EXPECT_GT(vol, 0.0);
      total += vol;
    }
    EXPECT_NEAR(total, 1.0 / factorial(d - 1), 1e-10);
  }
}

TEST(BarycentricGrid, CellsDoNotOverlap) {
  // random points are inside exactly one cell (up to boundary ties)
  std::mt19937_64 rng(31);
  const BarycentricGrid g(3, 5);
  for (int k = 0; k < 300; ++k) {
    const Vec u = random_direction(rng, 3);
    int inside = 0;
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      const auto cell = g.cell(c);
      Mat m(3, 3);
      for (int j = 0; j < 3; ++j) m.col(j) = g.vertex(cell[static_cast<std::size_t>(j)]);
      const Vec w = m.colPivHouseholderQr().solve(u);
      if (w.minCoeff() > 1e-9) ++inside;
    }
    EXPECT_EQ(inside, 1);
  }
}

TEST(BarycentricGrid, LocateReproducesThePoint) {
  std::mt19937_64 rng(32);
  for (int d = 1; d <= 5; ++d) {
    const BarycentricGrid g(d, 7);
    for (int k = 0; k < 200; ++k) {
      const Vec u = random_direction(rng, d);
      const auto loc = g.locate(u);
      Vec back = Vec::Zero(d);
      double wsum = 0.0;
      for (std::size_t j = 0; j < loc.vertices.size(); ++j) {
        EXPECT_GE(loc.weights[j], -1e-14);
        back += loc.weights[j] * g.vertex(loc.vertices[j]);
        wsum += loc.weights[j];
      }
      EXPECT_NEAR(wsum, 1.0, 1e-12);
      EXPECT_LT((back - u).lpNorm<Eigen::Infinity>(), 1e-12);
    }
  }
}

TEST(BarycentricGrid, LocateRejectsOutsidePoints) {
  const BarycentricGrid g(3, 4);
  EXPECT_THROW(g.locate(v({0.5, 0.5, 0.1})), DomainError);
  EXPECT_THROW(g.locate(v({-0.1, 0.6, 0.5})), DomainError);
  EXPECT_THROW(g.locate(v({0.5, 0.5})), DomainError);
  EXPECT_NO_THROW(g.locate(v({1.0 + 1e-13, -1e-13, 0.0})));
}

TEST(RadialProject, Values) {
  EXPECT_TRUE(radial_project(v({2.0, 2.0})).isApprox(v({0.5, 0.5})));
  EXPECT_TRUE(radial_project(v({1.0, 0.0})).isApprox(v({1.0, 0.0})));
  EXPECT_TRUE(radial_project(v({1.0, 3.0})).isApprox(v({0.25, 0.75})));
  EXPECT_THROW(radial_project(v({0.0, 0.0})), DomainError);
  EXPECT_EQ(support(radial_project(v({0.0, 3.0, 1.0}))), support(v({0.0, 3.0, 1.0})));
}

TEST(OrderFunction, Values) {
  EXPECT_DOUBLE_EQ(order_function(v({1.0, 2.0}), v({2.0, 2.0})), 1.0);
  EXPECT_TRUE(std::isinf(order_function(v({0.0, 0.0}), v({1.0, 2.0}))));
  EXPECT_DOUBLE_EQ(order_function(v({1.0, 0.0}), v({0.0, 1.0})), 0.0);
}

TEST(OrderFunction, Scaling) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> c(0.1, 10.0);
  for (int k = 0; k < 500; ++k) {
    const Vec x = fixtures::random_point(rng, 3, 0.01, 2.0);
    const Vec y = fixtures::random_point(rng, 3, 0.01, 2.0);
    const double s = c(rng);
    EXPECT_NEAR(order_function(s * x, y), order_function(x, y) / s, 1e-12 * (1.0 + order_function(x, y) / s));
  }
}

TEST(Harnack, Values) {
  EXPECT_DOUBLE_EQ(harnack(v({1.0, 1.0}), v({2.0, 2.0})), 0.5);
  EXPECT_DOUBLE_EQ(harnack(v({1.0, 0.0}), v({0.0, 1.0})), 1.0);
  EXPECT_THROW(harnack(v({0.0, 0.0}), v({1.0, 1.0})), DomainError);
  EXPECT_DOUBLE_EQ(restricted_harnack(v({1.0, 5.0}), v({2.0, 5.0}), SupportIndex{0b01}), 0.5);
  EXPECT_DOUBLE_EQ(restricted_harnack(v({1.0, 5.0}), v({2.0, 5.0}), SupportIndex{0b10}), 0.0);
  EXPECT_DOUBLE_EQ(restricted_harnack(v({1.0, 5.0}), v({2.0, 5.0}), SupportIndex::full(2)),
                   harnack(v({1.0, 5.0}), v({2.0, 5.0})));
  EXPECT_THROW(restricted_harnack(v({1.0, 0.0}), v({2.0, 0.0}), SupportIndex{0b10}), DomainError);
}

TEST(Harnack, SymmetryIdentityRange) {
  std::mt19937_64 rng(34);
  for (int k = 0; k < 1000; ++k) {
    Vec x = fixtures::random_point(rng, 3, 0.0, 2.0);
    Vec y = fixtures::random_point(rng, 3, 0.0, 2.0);
    if (rng() % 4 == 0) x[rng() % 3] = 0.0;
    const double h = harnack(x, y);
    EXPECT_DOUBLE_EQ(h, harnack(y, x));
    EXPECT_EQ(harnack(x, x), 0.0);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 1.0);
  }
}

TEST(ProjectEPerp, Values) {
  EXPECT_LT(project_e_perp(Vec::Ones(4)).norm(), 1e-15);
  EXPECT_TRUE(project_e_perp(v({1.0, 0.0})).isApprox(v({0.5, -0.5})));
  std::mt19937_64 rng(35);
  for (int k = 0; k < 200; ++k) {
    const Vec x = fixtures::random_point(rng, 4, -3.0, 3.0);
    const Vec p = project_e_perp(x);
    EXPECT_LT(std::abs(p.sum()), 1e-14 * (1.0 + x.cwiseAbs().sum()));
    EXPECT_LT((project_e_perp(p) - p).norm(), 1e-14);
    EXPECT_LT((project_e_perp(x + 1.7 * Vec::Ones(4)) - p).norm(), 1e-13);
  }
}

TEST(Hausdorff, Values) {
  const std::vector<Vec> a{v({0.0, 0.0})}, b{v({3.0, 4.0})};
  EXPECT_DOUBLE_EQ(hausdorff_points(a, b), 5.0);
  EXPECT_EQ(hausdorff_points(a, a), 0.0);
  const std::vector<Vec> p{v({0.0})}, q{v({1.0})};
  EXPECT_DOUBLE_EQ(hausdorff_points(p, q), 1.0);
  EXPECT_THROW(hausdorff_points(std::vector<Vec>{}, a), DomainError);
}

TEST(Hausdorff, MatchesNaiveDefinition) {
  std::mt19937_64 rng(36);
  for (int k = 0; k < 50; ++k) {
    std::vector<Vec> a, b;
    for (int i = 0; i < 20; ++i) a.push_back(fixtures::random_point(rng, 3, 0.0, 1.0));
    for (int i = 0; i < 15; ++i) b.push_back(fixtures::random_point(rng, 3, 0.0, 1.0));
    auto directed = [](const std::vector<Vec>& s, const std::vector<Vec>& t) {
      double worst = 0.0;
      for (const Vec& p : s) {
        double best = 1e300;
        for (const Vec& q : t) best = std::min(best, (p - q).norm());
        worst = std::max(worst, best);
      }
      return worst;
    };
    EXPECT_NEAR(hausdorff_points(a, b), std::max(directed(a, b), directed(b, a)), 1e-15);
  }
}

TEST(RadialManifold, EvalIsExactAtVerticesAndLinearInside) {
  auto g = make_grid(3, 6);
  std::mt19937_64 rng(37);
  std::vector<double> radii(g->size());
  for (auto& r : radii) r = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const RadialManifold s(g, radii);
  for (std::size_t i = 0; i < g->size(); ++i) EXPECT_EQ(s.radius_at(g->vertex(i)), radii[i]);
  const auto c = scaled_simplex(g, 0.3);
  for (int k = 0; k < 100; ++k) {
    const Vec u = random_direction(rng, 3);
    EXPECT_LT((c.eval(u) - 0.3 * u).norm(), 1e-15);
  }
  EXPECT_THROW(RadialManifold(g, std::vector<double>(g->size(), -1.0)), DomainError);
  EXPECT_THROW(RadialManifold(g, std::vector<double>(3, 1.0)), GridMismatch);
}

TEST(BoxBoundary, Values) {
  const auto b2 = box_boundary_manifold(make_grid(2, 4), 1.0);
  EXPECT_DOUBLE_EQ(b2.radius_at(v({0.5, 0.5})), 2.0);
  EXPECT_TRUE(b2.eval(v({0.5, 0.5})).isApprox(v({1.0, 1.0})));
  EXPECT_DOUBLE_EQ(b2.radius(b2.grid().corner(0)), 1.0);
  const auto b3 = box_boundary_manifold(make_grid(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(b3.radius_at(v({1.0 / 3, 1.0 / 3, 1.0 / 3})), 3.0);
}

TEST(BoxBoundary, IsWeaklyUnorderedForAnySideAndResolution) {
  for (int d = 2; d <= 3; ++d)
    for (int m : {2, 5, 9})
      for (double a : {0.3, 1.0, 2.5})
        EXPECT_TRUE(is_weakly_unordered(box_boundary_manifold(make_grid(d, m), a), 1e-12));
  EXPECT_TRUE(is_weakly_unordered(scaled_simplex(make_grid(3, 8), 1.0), 1e-12));
}

TEST(OrderViolations, DetectsDominatingPair) {
  auto g = make_grid(2, 4);
  std::vector<double> radii(g->size(), 1.0);
  // (0.5, 0.5) at R = 0.8 and (0.25, 0.75) at R = 2 give (0.4, 0.4) << (0.5, 1.5)
  const std::size_t mid = *g->find_vertex(std::vector<int>{2, 2});
  const std::size_t side = *g->find_vertex(std::vector<int>{1, 3});
  radii[mid] = 0.8;
  radii[side] = 2.0;
  const RadialManifold s(g, radii);
  const auto bad = order_violations(s, 1e-12);
  ASSERT_FALSE(bad.empty());
  bool found = false;
  for (const auto& o : bad) found = found || (o.lower == mid && o.upper == side);
  EXPECT_TRUE(found);
}

TEST(SupGap, Values) {
  auto g = make_grid(2, 8);
  EXPECT_EQ(sup_gap(scaled_simplex(g, 1.0), scaled_simplex(g, 1.0)), 0.0);
  EXPECT_DOUBLE_EQ(sup_gap(scaled_simplex(g, 1.0), scaled_simplex(g, 1.5)), 0.5);
  for (int d : {2, 3}) {
    auto gd = make_grid(d, 6);
    EXPECT_NEAR(sup_gap(scaled_simplex(gd, 0.25), box_boundary_manifold(gd, 1.0)), d - 0.25, 1e-12);
  }
  EXPECT_THROW(sup_gap(scaled_simplex(g, 1.0), scaled_simplex(make_grid(2, 4), 1.0)), GridMismatch);
}

TEST(SupGap, DominatesHausdorffOfVertexClouds) {
  std::mt19937_64 rng(38);
  auto g = make_grid(3, 5);
  std::uniform_real_distribution<double> r(0.5, 1.5);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a(g->size()), b(g->size());
    for (auto& x : a) x = r(rng);
    for (auto& x : b) x = r(rng);
    const RadialManifold sa(g, a), sb(g, b);
    EXPECT_LE(hausdorff_points(sa.vertex_cloud(), sb.vertex_cloud()), sup_gap(sa, sb) + 1e-15);
  }
}

TEST(Lipschitz, EstimateAndTolerance) {
  auto g = make_grid(2, 10);
  EXPECT_EQ(lipschitz_estimate(scaled_simplex(g, 2.0)), 0.0);
  // R(u) = 1 + u_1 changes by 1/m over a lattice edge of length sqrt(2)/m
  std::vector<double> radii(g->size());
  for (std::size_t i = 0; i < g->size(); ++i) radii[i] = 1.0 + g->vertex(i)[0];
  const RadialManifold s(g, radii);
  EXPECT_NEAR(lipschitz_estimate(s), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(order_tolerance(s), 2.0 * (1.0 / std::sqrt(2.0)) * std::sqrt(2.0) / 10, 1e-12);
  EXPECT_NEAR(interpolation_error_estimate(s), 0.0, 1e-15);
}
