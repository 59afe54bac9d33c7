#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ocstab;
using namespace ocstab::testing;

namespace {

double feasibility_gap(const ControlSet &set, const GridFn &u) {
  if (const L2Ball *b = set.as_ball())
    return std::max(0.0, lp_norm(u) - b->radius);
  if (const Box *b = set.as_box())
    return std::max({0.0, (b->lower.values() - u.values()).maxCoeff(),
                     (u.values() - b->upper.values()).maxCoeff()});
  return 0.0;
}

GridFn interior_control(const TimeGrid &g) {
  return GridFn::sample_scalar(g, [](double t) { return 2.4 * t - 1.2; });
}

} // namespace

TEST(ReducedGradient, ZeroData) {
  const TimeGrid g(20);
  const OcProblem p(g,
                    {MatrixPath::constant(g, MatrixXd::Zero(2, 2)),
                     MatrixPath::constant(g, MatrixXd::Zero(2, 1)),
                     MatrixPath::constant(g, MatrixXd::Zero(2, 2))},
                    CostSpec::zero(2, 1, 2), ControlSet::unconstrained());
  EXPECT_EQ(lp_norm(reduced_gradient(p, GridFn::zeros(g, 1), p.zero_parameter(vec2(0, 0)))), 0.0);
}

TEST(ReducedGradient, VanishesAtInteriorOptimum) {
  double prev = 0.0;
  for (int n : {100, 200, 400}) {
    const OcProblem p = double_integrator_problem(n);
    const double gn =
        lp_norm(reduced_gradient(p, interior_control(p.grid()), p.zero_parameter(vec2(0.2, 0))));
    if (n == 200) {
      EXPECT_LE(gn, 5e-3);
    }
    if (prev > 0) {
      EXPECT_NEAR(prev / gn, 4.0, 0.6);
    }
    prev = gn;
  }
}

TEST(ReducedGradient, MatchesCentralDifferences) {
  Rng rng(42);
  const double eps = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const OcProblem p = random_problem(rng, uniform_int(rng, 10, 120), SetKind::Unconstrained);
    const Parameter w = random_parameter(rng, p);
    const GridFn u = random_smooth(rng, p.grid(), p.m());
    const GridFn d = random_nodal(rng, p.grid(), p.m());
    const double fd =
        (composed_cost(p, u + eps * d, w) - composed_cost(p, u - eps * d, w)) / (2 * eps);
    EXPECT_NEAR(pairing(reduced_gradient(p, u, w), d), fd, 1e-6) << "trial " << trial;
  }
}

TEST(Project, Examples) {
  const TimeGrid g(100);
  const ControlSet ball = ControlSet::ball(1.0);
  const GridFn inside = interior_control(g);
  EXPECT_EQ(sup_distance(project(ball, inside), inside), 0.0);

  const GridFn big = GridFn::sample_scalar(g, [](double t) { return 2 * std::sqrt(3.0) * t; });
  const GridFn scaled = big * (2.0 / lp_norm(big));
  EXPECT_LT(sup_distance(project(ball, scaled), scaled * 0.5), 1e-15);

  const ControlSet box = ControlSet::box(GridFn::constant(g, -VectorXd::Ones(1)),
                                         GridFn::constant(g, VectorXd::Ones(1)));
  const GridFn c = project(box, GridFn::sample_scalar(g, [](double t) { return 3 * t - 2; }));
  EXPECT_EQ(c(0, 0), -1.0);
  EXPECT_EQ(c(0, 100), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 50), -0.5);

  const GridFn any = GridFn::constant(g, VectorXd::Constant(1, 7.0));
  EXPECT_EQ(sup_distance(project(ControlSet::unconstrained(), any), any), 0.0);
}

TEST(Project, NonexpansiveAndFeasible) {
  Rng rng(5);
  for (SetKind kind : {SetKind::Ball, SetKind::Box, SetKind::Unconstrained}) {
    for (int trial = 0; trial < 100; ++trial) {
      const TimeGrid g(uniform_int(rng, 2, 60));
      const int m = uniform_int(rng, 1, 3);
      const ControlSet set = make_set(rng, kind, g, m);
      const GridFn u = random_nodal(rng, g, m, 3.0), v = random_nodal(rng, g, m, 3.0);
      const GridFn pu = project(set, u), pv = project(set, v);
      EXPECT_LE(lp_norm(pu - pv), lp_norm(u - v) + 1e-10);
      EXPECT_LE(feasibility_gap(set, pu), 1e-10);
    }
  }
}

TEST(Solve, InteriorExample) {
  const OcProblem p = double_integrator_problem(200);
  const SolveResult r = solve(p, p.zero_parameter(vec2(0.2, 0)));
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.value, 1e-5);
  EXPECT_LE(lp_norm(r.u_bar - interior_control(p.grid())), 2e-3);
  EXPECT_NEAR(std::pow(lp_norm(r.u_bar), 2), 0.48, 1e-3);
  ASSERT_TRUE(r.boundary_flag);
  EXPECT_EQ(*r.boundary_flag, BoundaryFlag::Interior);
  EXPECT_EQ(r.value, eval_cost(p, r.x_bar, r.u_bar, p.zero_parameter(vec2(0.2, 0))));
}

TEST(Solve, BoundaryExample) {
  // The discrete reachable set shrinks by O(h^2); a fine grid keeps the
  // boundary point reachable to within the tolerances.
  const OcProblem p = double_integrator_problem(2000);
  const SolveResult r = solve(p, p.zero_parameter(vec2(0, 0.5)));
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.value, 1e-5);
  EXPECT_LE(lp_norm(r.u_bar - GridFn::sample_scalar(p.grid(), [](double t) { return 3 * t - 2; })),
            2e-3);
  ASSERT_TRUE(r.boundary_flag);
  EXPECT_EQ(*r.boundary_flag, BoundaryFlag::Boundary);
}

TEST(Solve, OutsideExampleAgreesWithFineGrid) {
  const OcProblem coarse = double_integrator_problem(200), fine = double_integrator_problem(2000);
  const SolveResult rc = solve(coarse, coarse.zero_parameter(vec2(1, 0)));
  const SolveResult rf = solve(fine, fine.zero_parameter(vec2(1, 0)));
  EXPECT_GT(rc.value, 0.1);
  EXPECT_LE(std::abs(rc.value - rf.value) / rf.value, 1e-4);
  EXPECT_EQ(*rc.boundary_flag, BoundaryFlag::Boundary);
}

TEST(Solve, RandomInteriorParametersReachTheOrigin) {
  Rng rng(7);
  const OcProblem p = double_integrator_problem(200);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector2d a = random_in_ellipse(rng, 0.95);
    EXPECT_LE(solve(p, p.zero_parameter(a)).value, 1e-5) << a.transpose();
  }
}

TEST(Solve, MonotoneDescentAndFeasibleIterates) {
  Rng rng(9);
  SolveOptions opts;
  opts.record_trace = true;
  for (SetKind kind : {SetKind::Ball, SetKind::Box, SetKind::Unconstrained}) {
    for (int trial = 0; trial < 8; ++trial) {
      const OcProblem p = random_problem(rng, 60, kind);
      const Parameter w = random_parameter(rng, p);
      const SolveResult r = solve(p, w, opts);
      EXPECT_TRUE(r.converged);
      for (std::size_t j = 1; j < r.trace.size(); ++j)
        EXPECT_LE(r.trace[j], r.trace[j - 1] + 1e-12);
      for (int iters = 1; iters <= 6; ++iters) {
        SolveOptions cut;
        cut.max_iters = iters;
        EXPECT_LE(feasibility_gap(p.control_set(), solve(p, w, cut).u_bar), 1e-10);
      }
    }
  }
}

TEST(Solve, Deterministic) {
  Rng rng(10);
  const OcProblem p = random_problem(rng, 80, SetKind::Box);
  const Parameter w = random_parameter(rng, p);
  const SolveResult a = solve(p, w), b = solve(p, w);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.u_bar.values(), b.u_bar.values());
}

TEST(Solve, NonConvergenceReturnsBestIterate) {
  const OcProblem p = double_integrator_problem(200);
  SolveOptions opts;
  opts.max_iters = 1;
  const SolveResult r = solve(p, p.zero_parameter(vec2(1, 0)), opts);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_GT(r.optimality_residual, opts.tol_opt);
  EXPECT_LT(r.value, 1.0); // J(0) = |(1, 0)|^2

  opts.backtrack = 1.5;
  EXPECT_THROW(solve(p, p.zero_parameter(vec2(1, 0)), opts), std::invalid_argument);
}

TEST(VerifyOptimality, ClosedFormsAndPerturbation) {
  const OcProblem p = double_integrator_problem(200);
  const Parameter wi = p.zero_parameter(vec2(0.2, 0));
  const GridFn ui = interior_control(p.grid());
  const Trajectory xi = integrate_state(p, ui, wi);
  const OptimalityCheck ci = verify_optimality(p, wi, xi, ui, 1e-3);
  EXPECT_TRUE(ci.ok);
  EXPECT_LT(lp_norm(ci.u_star), 1e-4);
  EXPECT_EQ(ci.membership.branch, ConeBranch::BallInterior);

  const Parameter wb = p.zero_parameter(vec2(0, 0.5));
  const GridFn ub = GridFn::sample_scalar(p.grid(), [](double t) { return 3 * t - 2; });
  const OptimalityCheck cb = verify_optimality(p, wb, integrate_state(p, ub, wb), ub, 1e-3);
  EXPECT_TRUE(cb.ok);
  EXPECT_EQ(cb.membership.branch, ConeBranch::BallBoundary);
  EXPECT_GE(*cb.membership.lambda, 0.0);

  const GridFn up = ui + GridFn::constant(p.grid(), VectorXd::Constant(1, 0.1));
  const Trajectory xp = integrate_state(p, up, wi);
  const OptimalityCheck cp = verify_optimality(p, wi, xp, up, 1e-3);
  EXPECT_FALSE(cp.ok);
  EXPECT_GT(cp.residual, 1e-2);
  EXPECT_GT(eval_cost(p, xp, up, wi), eval_cost(p, xi, ui, wi));
}

TEST(VerifyOptimality, SolverOutputIsCertified) {
  Rng rng(11);
  for (SetKind kind : {SetKind::Ball, SetKind::Box, SetKind::Unconstrained}) {
    for (int trial = 0; trial < 5; ++trial) {
      const OcProblem p = random_problem(rng, 50, kind);
      const Parameter w = random_parameter(rng, p);
      const SolveResult r = solve(p, w);
      ASSERT_TRUE(r.converged);
      EXPECT_TRUE(verify_optimality(p, w, r.x_bar, r.u_bar, 1e-6).ok);
    }
  }
}
