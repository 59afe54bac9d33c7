#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ocstab;
using namespace ocstab::testing;

namespace {

/// \int_0^1 (a t + b)^2 dt from the antiderivative.
double exact_energy(const Eigen::Vector2d &alpha) {
  const double a = 6 * (2 * alpha(0) + alpha(1));
  const double b = -2 * (3 * alpha(0) + 2 * alpha(1));
  return a * a / 3 + a * b + b * b;
}

/// Point on the ellipse boundary at angle phi.
Eigen::Vector2d on_boundary(double phi) {
  // 12 a1^2 + 12 a1 a2 + 4 a2^2 = 3 a1^2 + (3 a1 + 2 a2)^2.
  const double a1 = std::cos(phi) / std::sqrt(3.0);
  const double a2 = (std::sin(phi) - 3 * a1) / 2;
  return {a1, a2};
}

} // namespace

TEST(Ellipse, Examples) {
  const EllipseMembership in = ellipse_membership(vec2(0.2, 0));
  EXPECT_EQ(in.cls, EllipseClass::Interior);
  EXPECT_NEAR(in.quadratic_value, 12.0 / 25 - 1, 1e-15);
  EXPECT_EQ(ellipse_membership(vec2(0, 0.5)).cls, EllipseClass::Boundary);
  const EllipseMembership out = ellipse_membership(vec2(1, 0));
  EXPECT_EQ(out.cls, EllipseClass::Outside);
  EXPECT_EQ(out.quadratic_value, 11.0);
  EXPECT_STREQ(to_string(EllipseClass::Boundary), "Boundary");
}

TEST(Ellipse, BoundaryParametrization) {
  for (int i = 0; i < 64; ++i) {
    const Eigen::Vector2d a = on_boundary(2 * M_PI * i / 64);
    EXPECT_EQ(ellipse_membership(a).cls, EllipseClass::Boundary) << a.transpose();
  }
}

TEST(AnalyticSolution, Examples) {
  const TimeGrid g(50);
  const AnalyticSolution s = analytic_solution(g, vec2(0.2, 0));
  for (int i = 0; i < g.n_nodes(); ++i) {
    const double t = g.t(i);
    EXPECT_NEAR(s.state(0, i), 0.4 * t * t * t - 0.6 * t * t + 0.2, 1e-15);
    EXPECT_NEAR(s.state(1, i), 1.2 * t * t - 1.2 * t, 1e-15);
    EXPECT_NEAR(s.control(0, i), 2.4 * t - 1.2, 1e-15);
  }
  const AnalyticSolution b = analytic_solution(g, vec2(0, 0.5));
  for (int i = 0; i < g.n_nodes(); ++i)
    EXPECT_NEAR(b.control(0, i), 3 * g.t(i) - 2, 1e-15);
  const AnalyticSolution z = analytic_solution(g, vec2(0, 0));
  EXPECT_EQ(lp_norm(z.state), 0.0);
  EXPECT_EQ(lp_norm(z.control), 0.0);
  EXPECT_THROW(analytic_solution(g, vec2(1, 0)), OutsideRegion);
}

TEST(AnalyticSolution, ReachesOriginAndSatisfiesDynamics) {
  Rng rng(1);
  const TimeGrid g(100);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Vector2d a = random_in_ellipse(rng, 1.0);
    const AnalyticSolution s = analytic_solution(g, a);
    EXPECT_NEAR((s.state.at(0) - a).norm(), 0.0, 1e-15);
    EXPECT_NEAR(s.state.at(g.n_steps()).norm(), 0.0, 1e-14);
    // x2 = x1' and u = x2' by central differences of the cubic.
    for (int i = 1; i < g.n_steps(); ++i) {
      EXPECT_NEAR((s.state(0, i + 1) - s.state(0, i - 1)) / (2 * g.h()), s.state(1, i),
                  g.h() * g.h() * 20);
      EXPECT_NEAR((s.state(1, i + 1) - s.state(1, i - 1)) / (2 * g.h()), s.control(0, i),
                  1e-12);
    }
  }
}

TEST(AnalyticSolution, EnergyEqualsQuadraticForm) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector2d a(uniform(rng, -2, 2), uniform(rng, -2, 2));
    const double q = 12 * a(0) * a(0) + 12 * a(0) * a(1) + 4 * a(1) * a(1);
    EXPECT_NEAR(exact_energy(a), q, 1e-10 * std::max(1.0, q));
  }
  // Boundary <=> unit energy.
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d a = i % 2 ? on_boundary(0.37 * i) : random_in_ellipse(rng, 0.99);
    const bool boundary = ellipse_membership(a).cls == EllipseClass::Boundary;
    EXPECT_EQ(boundary, std::abs(std::sqrt(exact_energy(a)) - 1) <= 1e-8) << a.transpose();
  }
}

TEST(AnalyticSolution, QuadratureOfEnergyConverges) {
  const Eigen::Vector2d a(0.1, 0.2);
  double prev = 0;
  for (int n : {50, 100, 200}) {
    const GridFn u = analytic_solution(TimeGrid(n), a).control;
    const double err = std::abs(std::pow(lp_norm(u), 2) - exact_energy(a));
    // Trapezoid on a quadratic: error = (h^2 / 6) * slope^2.
    const double slope = 6 * (2 * a(0) + a(1));
    EXPECT_NEAR(err, slope * slope / (6.0 * n * n), 1e-12);
    if (prev > 0) {
      EXPECT_NEAR(prev / err, 4.0, 1e-6);
    }
    prev = err;
  }
}

TEST(FdValueGradient, Examples) {
  const OcProblem di = double_integrator_problem(200);
  EXPECT_LE(fd_value_gradient(di, di.zero_parameter(vec2(0.2, 0))).norm(), 1e-4);

  const OcProblem frozen = frozen_dynamics_problem(40);
  EXPECT_NEAR((fd_value_gradient(frozen, frozen.zero_parameter(vec2(1, -2))) - vec2(2, -4)).norm(),
              0.0, 1e-6);

  const Parameter w = di.zero_parameter(vec2(1, 0));
  const SolveResult r = solve(di, w);
  const SubdiffResult d =
      compute_subdifferential(di, w, r.x_bar, r.u_bar, 1e-6, r.optimality_residual);
  EXPECT_LE((fd_value_gradient(di, w) - d.alpha_star).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(FdValueGradient, Monotone) {
  Rng rng(3);
  const OcProblem di = double_integrator_problem(100);
  std::vector<std::pair<VectorXd, VectorXd>> pts;
  for (int i = 0; i < 6; ++i) {
    const VectorXd a(vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)));
    pts.emplace_back(a, fd_value_gradient(di, di.zero_parameter(a)));
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      EXPECT_GE((pts[i].second - pts[j].second).dot(pts[i].first - pts[j].first), -1e-5);
}
