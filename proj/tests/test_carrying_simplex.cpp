#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace carsim;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

CarryingSimplexProblem problem(const KolmogorovMap& map, int m) {
  const auto rep = check_assumptions(map);
  return make_problem(map, rep, map.dim() == 1 ? make_grid(1, 1) : make_grid(map.dim(), m));
}

const ConvergenceReport& coupled_run() {
  static const ConvergenceReport rep = [] {
    SolverOptions opt;
    opt.tolerance = 1e-8;
    return compute_cs(problem(ricker2d(0.5, 0.5, 0.5, 0.5), 64), opt);
  }();
  return rep;
}

}  // namespace

TEST(ComputeCs, OneDimensionalMapsConvergeToOne) {
  for (const auto& map : {beverton_holt(), atkinson_allen(0.5), ricker1d(0.5)}) {
    SolverOptions opt;
    opt.tolerance = 1e-9;
    const auto rep = compute_cs(problem(map, 1), opt);
    ASSERT_EQ(rep.termination, Termination::converged) << map.name();
    EXPECT_LT(std::abs(rep.sigma->radius(0) - 1.0), 1e-8) << map.name();
    EXPECT_LT(rep.final_gap, 1e-9);
  }
}

TEST(ComputeCs, DecoupledRickerGivesTheUnitBoxBoundary) {
  const int m = 32;
  const auto rep = compute_cs(problem(ricker2d(0.5, 0.5, 0.0, 0.0), m));
  ASSERT_EQ(rep.termination, Termination::converged);
  const auto h1 = box_boundary_manifold(rep.sigma->grid_ptr(), 1.0);
  EXPECT_LE(hausdorff_points(rep.sigma->vertex_cloud(), h1.vertex_cloud()), 3.0 / m);
  // the discrete limit differs from H(1) at second order in the spacing
  EXPECT_LT(sup_gap(*rep.sigma, h1), 1.0 / (m * m));
}

TEST(ComputeCs, CoupledRickerCornersAndInteriorFixedPoint) {
  const auto& rep = coupled_run();
  ASSERT_EQ(rep.termination, Termination::converged);
  const auto& sigma = *rep.sigma;
  for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(sigma.radius(sigma.grid().corner(i)) - 1.0), 1e-6);
  // x + y/2 = 1, y + x/2 = 1
  Mat A(2, 2);
  A << 1.0, 0.5, 0.5, 1.0;
  const Vec fixed = A.partialPivLu().solve(Vec::Ones(2));
  EXPECT_NEAR(fixed[0], 2.0 / 3.0, 1e-15);
  const auto g = gamma_membership(sigma, fixed, rep.certified_error());
  EXPECT_EQ(g.cls, GammaClass::on);
  EXPECT_LT(std::abs(g.margin), 1e-3);
}

TEST(ComputeCs, HistoriesAreMonotone) {
  const auto& rep = coupled_run();
  EXPECT_EQ(rep.monotonicity_violations(), 0);
  EXPECT_EQ(rep.monotonicity_violations_strict(), 0);
  for (std::size_t n = 1; n < rep.gap_history.size(); ++n)
    EXPECT_LE(rep.gap_history[n], rep.gap_history[n - 1] + 1e-12);
  EXPECT_EQ(rep.gap_history.size(), static_cast<std::size_t>(rep.iterations) + 1);
  EXPECT_EQ(rep.hausdorff_history.size(), rep.gap_history.size());
  for (std::size_t n = 0; n < rep.gap_history.size(); ++n)
    EXPECT_LE(rep.hausdorff_history[n], rep.gap_history[n] + 1e-15);
}

TEST(ComputeCs, EveryIterateBracketsTheLimit) {
  const auto prob = problem(ricker2d(0.5, 0.5, 0.5, 0.5), 32);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> seen;
  SolverOptions opt;
  opt.on_iterate = [&](const RadialManifold& lo, const RadialManifold& up, int) {
    seen.emplace_back(lo.radii(), up.radii());
  };
  const auto rep = compute_cs(prob, opt);
  ASSERT_EQ(rep.termination, Termination::converged);
  ASSERT_EQ(static_cast<int>(seen.size()), rep.iterations);
  const double tol = rep.tol_order;
  for (const auto& [lo, up] : seen) {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      EXPECT_LE(lo[i], rep.sigma->radius(i) + tol);
      EXPECT_LE(rep.sigma->radius(i), up[i] + tol);
      // in fact the bracket holds up to the final half-gap
      EXPECT_LE(lo[i], rep.sigma->radius(i) + 0.5 * rep.final_gap + 1e-12);
      EXPECT_GE(up[i], rep.sigma->radius(i) - 0.5 * rep.final_gap - 1e-12);
    }
  }
}

TEST(ComputeCs, MaxIterKeepsPartialManifolds) {
  SolverOptions opt;
  opt.max_iter = 1;
  const auto rep = compute_cs(problem(ricker2d(0.5, 0.5, 0.5, 0.5), 16), opt);
  EXPECT_EQ(rep.termination, Termination::max_iter);
  EXPECT_EQ(rep.iterations, 1);
  ASSERT_TRUE(rep.lower && rep.upper);
  EXPECT_EQ(rep.lower->iteration(), 1);
  EXPECT_GT(rep.final_gap, opt.tolerance);
}

TEST(ComputeCs, FoldIsReportedNotThrown) {
  // forced through despite failing AS4: the direction map folds on this box
  const CarryingSimplexProblem prob{ricker2d(1.5, 1.5, 0.5, 0.5), 0.5, 0.5, make_grid(2, 32)};
  const auto rep = compute_cs(prob);
  EXPECT_EQ(rep.termination, Termination::fold_error);
  EXPECT_FALSE(rep.error_message.empty());
  EXPECT_TRUE(rep.lower && rep.upper);
}

TEST(ComputeCs, ThreeSpeciesLeslieGower) {
  const auto rep = compute_cs(problem(fixtures::leslie_gower3(), 12));
  ASSERT_EQ(rep.termination, Termination::converged);
  EXPECT_EQ(rep.monotonicity_violations_strict(), 0);
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(rep.sigma->radius(rep.sigma->grid().corner(i)) - 1.0), 1e-6);
}

TEST(SeedIndependence, SimplexSeedConvergesToSigma) {
  const auto prob = problem(ricker2d(0.5, 0.5, 0.5, 0.5), 32);
  SolverOptions opt;
  opt.tolerance = 1e-8;
  const auto rep = compute_cs(prob, opt);
  const auto run = iterate_from_seed(prob, scaled_simplex(prob.grid, 1.0), 0.1 * opt.tolerance);
  ASSERT_TRUE(run.converged);
  EXPECT_LT(sup_gap(*run.manifold, *rep.sigma), 2.0 * opt.tolerance);
  // a wavy seed between eps Delta and the box boundary
  std::vector<double> radii(prob.grid->size());
  for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = 0.8 + 0.3 * std::sin(7.0 * prob.grid->vertex(i)[0]);
  const auto run2 = iterate_from_seed(prob, RadialManifold(prob.grid, radii), 0.1 * opt.tolerance);
  ASSERT_TRUE(run2.converged);
  EXPECT_LT(sup_gap(*run2.manifold, *rep.sigma), 2.0 * opt.tolerance);
}

TEST(InducedMap, FixedDirections) {
  const auto& sigma = *coupled_run().sigma;
  const auto map = ricker2d(0.5, 0.5, 0.5, 0.5);
  EXPECT_EQ(induced_map(map, sigma, v({1.0, 0.0})), v({1.0, 0.0}));
  EXPECT_EQ(induced_map(map, sigma, v({0.0, 1.0})), v({0.0, 1.0}));
  EXPECT_LT((induced_map(map, sigma, v({0.5, 0.5})) - v({0.5, 0.5})).norm(), 1e-15);
  const auto one = scaled_simplex(make_grid(1, 1), 1.0);
  EXPECT_EQ(induced_map(beverton_holt(), one, v({1.0})), v({1.0}));
}

TEST(GammaMembership, Classes) {
  const auto& rep = coupled_run();
  const auto& sigma = *rep.sigma;
  const double tol = rep.certified_error();
  EXPECT_EQ(gamma_membership(sigma, v({1.0, 0.0}), tol).cls, GammaClass::on);
  EXPECT_EQ(gamma_membership(sigma, v({0.0, 1.0}), tol).cls, GammaClass::on);
  EXPECT_EQ(gamma_membership(sigma, v({0.0, 0.0}), tol).cls, GammaClass::origin);
  EXPECT_THROW(gamma_membership(sigma, v({-1.0, 0.0}), tol), DomainError);
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> t(0.0, 1.0), below(0.05, 0.95), above(1.05, 1.2);
  for (int k = 0; k < 500; ++k) {
    const double a = t(rng);
    const Vec u = v({a, 1.0 - a});
    const Vec x = sigma.eval(u);
    EXPECT_EQ(gamma_membership(sigma, x, tol).cls, GammaClass::on);
    EXPECT_EQ(gamma_membership(sigma, below(rng) * x, tol).cls, GammaClass::below);
    const Vec y = above(rng) * x;
    if (y.maxCoeff() <= 1.25) EXPECT_EQ(gamma_membership(sigma, y, tol).cls, GammaClass::above);
  }
}

TEST(Trajectory, BevertonHoltDecreasesToOne) {
  const auto one = scaled_simplex(make_grid(1, 1), 1.0);
  const auto dist = attract_trajectory(beverton_holt(), one, v({3.0}), 60);
  for (std::size_t n = 1; n < dist.size(); ++n) {
    if (dist[n - 1] > 1e-14) EXPECT_LT(dist[n], dist[n - 1]);
    else EXPECT_LE(dist[n], 1e-14);
  }
  EXPECT_LT(dist.back(), 1e-12);
  const auto orbit = simulate_orbit(beverton_holt(), v({3.0}), 60);
  for (std::size_t n = 1; n < orbit.size(); ++n) EXPECT_GT(orbit[n][0], 1.0);
}

TEST(Trajectory, RickerOvershootsThenRises) {
  // F(x*) = 1 at the larger root x* of x e^{(1-x)/2} = 1
  const auto map = ricker1d(0.5);
  const double xstar = boost::math::tools::bisect([](double x) { return x * std::exp(0.5 * (1.0 - x)) - 1.0; },
                                                  2.0, 10.0, boost::math::tools::eps_tolerance<double>(50))
                           .first;
  const auto orbit = simulate_orbit(map, v({xstar + 0.5}), 40);
  EXPECT_GT(orbit[1][0], 0.0);
  EXPECT_LT(orbit[1][0], 1.0);
  for (std::size_t n = 2; n < orbit.size(); ++n) {
    EXPECT_GT(orbit[n][0], orbit[n - 1][0]);
    EXPECT_LT(orbit[n][0], 1.0);
  }
}

TEST(Trajectory, PointsOnSigmaStayOnIt) {
  const auto& rep = coupled_run();
  const auto map = ricker2d(0.5, 0.5, 0.5, 0.5);
  for (double a : {0.1, 0.37, 0.5, 0.81}) {
    const auto dist = attract_trajectory(map, *rep.sigma, rep.sigma->eval(v({a, 1.0 - a})), 30);
    for (double d : dist) EXPECT_LT(d, 2.0 * rep.certified_error() + 1e-9);
  }
}

TEST(Trajectory, EscapeIsReported) {
  // f(x) = 2 forever doubles the population
  const KolmogorovMap growth("growth", 1, {}, [](const Vec&) { return Vec::Constant(1, 2.0); });
  EXPECT_THROW(simulate_orbit(growth, v({1.0}), 100), EscapeError);
}

TEST(ShadowPoint, Values) {
  const auto& rep = coupled_run();
  const auto map = ricker2d(0.5, 0.5, 0.5, 0.5);
  const auto far = shadow_point(map, *rep.sigma, v({0.1, 0.1}), 50);
  EXPECT_LT(far.residual, 1e-6);
  const Vec on = rep.sigma->point(17);
  EXPECT_LT(shadow_point(map, *rep.sigma, on, 10).residual, 1e-12);
  const auto one = scaled_simplex(make_grid(1, 1), 1.0);
  const auto s1 = shadow_point(beverton_holt(), one, v({0.2}), 5);
  EXPECT_DOUBLE_EQ(s1.point[0], 1.0);
  EXPECT_DOUBLE_EQ(s1.residual, std::abs(iterate_F(beverton_holt(), v({0.2}), 5)[0] - 1.0));
}

TEST(ShadowPoint, ResidualShrinksWithHorizon) {
  const auto& rep = coupled_run();
  const auto map = ricker2d(0.5, 0.5, 0.5, 0.5);
  const Vec x0 = v({0.05, 0.3});
  const double r10 = shadow_point(map, *rep.sigma, x0, 10).residual;
  const double r40 = shadow_point(map, *rep.sigma, x0, 40).residual;
  EXPECT_LT(r40, r10);
}

TEST(VerifyCs, OneDimensionalIsMostlyVacuous) {
  const auto prob = problem(beverton_holt(), 1);
  const auto rep = compute_cs(prob);
  VerifyOptions opt;
  opt.box_upper = prob.box_upper();
  opt.strict_retrotone = true;
  const auto ver = verify_cs(prob.map, *rep.sigma, opt);
  EXPECT_TRUE(ver.lipschitz_vacuous);
  EXPECT_EQ(ver.lipschitz_violations, 0);
  EXPECT_EQ(ver.harnack_violations, 0);
  EXPECT_EQ(ver.retrotone_violations, 0);
  EXPECT_TRUE(ver.passes());
}

TEST(VerifyCs, SymmetrizedOrderCanDropWhenImagesAreUnordered) {
  // x << y with common support, yet F_1(x) > F_1(y): mu on J = {1} falls
  const auto map = ricker2d(0.5, 0.5, 0.5, 0.5);
  const Vec x = v({1.0, 0.1}), y = v({1.0001, 1.2});
  const SupportIndex j{1u};
  const Vec fx = eval_F(map, x), fy = eval_F(map, y);
  EXPECT_GT(fx[0], fy[0]);
  EXPECT_LT(symmetrized_order(mask(fx, j), mask(fy, j)), symmetrized_order(mask(x, j), mask(y, j)) - 0.2);
  // the one-sided ratio still grows
  EXPECT_GT(fx[0] / fy[0], x[0] / y[0]);
}

TEST(VerifyCs, CoupledRickerPasses) {
  const auto& rep = coupled_run();
  VerifyOptions opt;
  opt.box_upper = 1.25;
  opt.seed = 3;
  opt.strict_retrotone = true;
  const auto ver = verify_cs(ricker2d(0.5, 0.5, 0.5, 0.5), *rep.sigma, opt);
  EXPECT_EQ(ver.unorder_violations, 0);
  EXPECT_LT(ver.fixed_point_residual_max(), 1e-6);
  EXPECT_LE(ver.lipschitz_ratio_max, std::sqrt(3.0) * (1.0 + 1e-9));
  EXPECT_EQ(ver.harnack_violations, 0);
  EXPECT_GE(ver.harnack_pairs, 1000);
  EXPECT_EQ(ver.retrotone_violations, 0);
  EXPECT_GT(ver.retrotone_premises, 400);
  EXPECT_GE(ver.attraction_fraction, 0.95);
  EXPECT_LT(ver.invariance_residual, 1e-6);
  EXPECT_TRUE(ver.passes());
}

TEST(VerifyCs, SameSeedSameReport) {
  const auto& rep = coupled_run();
  VerifyOptions opt;
  opt.box_upper = 1.25;
  opt.seed = 99;
  opt.sample_count = 200;
  const auto a = verify_cs(ricker2d(0.5, 0.5, 0.5, 0.5), *rep.sigma, opt);
  const auto b = verify_cs(ricker2d(0.5, 0.5, 0.5, 0.5), *rep.sigma, opt);
  EXPECT_EQ(a.retrotone_premises, b.retrotone_premises);
  EXPECT_EQ(a.attraction_worst, b.attraction_worst);
  EXPECT_EQ(a.harnack_checks, b.harnack_checks);
}

TEST(VerifyCs, PerturbedSigmaFailsInvariance) {
  const auto& rep = coupled_run();
  std::vector<double> radii = rep.sigma->radii();
  for (auto& r : radii) r *= 1.05;
  const RadialManifold bumped(rep.sigma->grid_ptr(), radii);
  VerifyOptions opt;
  opt.box_upper = 1.25;
  opt.sample_count = 100;
  const auto ver = verify_cs(ricker2d(0.5, 0.5, 0.5, 0.5), bumped, opt);
  EXPECT_GT(ver.invariance_residual, 1e-2);
  EXPECT_FALSE(ver.passes());
}

TEST(VerifyCs, InvarianceResidualUnderRefinement) {
  const auto map = ricker2d(0.5, 0.5, 0.5, 0.5);
  for (int m : {16, 32}) {
    const auto rep = compute_cs(problem(map, m));
    VerifyOptions opt;
    opt.box_upper = 1.25;
    opt.sample_count = 0;
    const auto ver = verify_cs(map, *rep.sigma, opt);
    EXPECT_LT(ver.invariance_residual, rep.sigma->grid().spacing());
    EXPECT_LT(ver.invariance_residual, 10.0 * rep.tolerance);
    EXPECT_TRUE(ver.harnack_vacuous);
    EXPECT_TRUE(ver.attraction_vacuous);
  }
}

TEST(VerifyCs, BrokenJuryConditionShowsRetrotoneViolations) {
  // r = s = 1.5 fails AS4; force a sigma on [0, 1.25]^2 and sample
  const auto map = ricker2d(1.5, 1.5, 0.5, 0.5);
  const CarryingSimplexProblem prob{map, 0.25, 0.5, make_grid(2, 32)};
  const auto rep = compute_cs(prob);
  const RadialManifold& sigma = *rep.sigma;
  VerifyOptions opt;
  opt.box_upper = 1.25;
  opt.strict_retrotone = true;
  const auto ver = verify_cs(map, sigma, opt);
  EXPECT_GT(ver.retrotone_violations, 0);
  EXPECT_FALSE(ver.passes());
}

TEST(VerifyCs, PassingMapsHaveNoHarnackOrRetrotoneViolations) {
  for (const auto& map : fixtures::passing_maps()) {
    const auto check = check_assumptions(map);
    const auto prob = make_problem(map, check, map.dim() == 1 ? make_grid(1, 1) : make_grid(map.dim(), 8));
    const auto rep = compute_cs(prob);
    VerifyOptions opt;
    opt.box_upper = prob.box_upper();
    opt.strict_retrotone = check.as3.mode == As3Mode::strict;
    opt.seed = 5;
    const auto ver = verify_cs(map, *rep.sigma, opt);
    EXPECT_EQ(ver.harnack_violations, 0) << map.name();
    EXPECT_EQ(ver.retrotone_violations, 0) << map.name();
    EXPECT_GT(ver.retrotone_premises, 0) << map.name();
  }
}
