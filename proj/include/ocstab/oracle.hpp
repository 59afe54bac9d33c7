/// @file
/// Ground truth for the double integrator
///
///   x1' = x2 + theta1,  x2' = u + theta2,  g(x) = |x|^2,  L = 0,
///   U = { u : |u|_2 <= 1 },
///
/// whose target x(1) = 0 is reachable within the energy budget exactly on
/// the ellipse 12 a1^2 + 12 a1 a2 + 4 a2^2 <= 1, plus finite-difference
/// value gradients usable on any problem.
#pragma once

#include <future>
#include <vector>

#include "ocstab/grid.hpp"
#include "ocstab/problem.hpp"
#include "ocstab/solver.hpp"

namespace ocstab {

/// Double integrator with C = I, g = |x|^2, L = 0 and the L2 ball.
inline OcProblem double_integrator_problem(int grid_steps, double radius = 1.0) {
  const TimeGrid g(grid_steps);
  MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  CostSpec cost = CostSpec::zero(2, 1, 2);
  cost.Q = MatrixXd::Identity(2, 2);
  return OcProblem(g,
                   {MatrixPath::constant(g, A), MatrixPath::constant(g, B),
                    MatrixPath::constant(g, MatrixXd::Identity(2, 2))},
                   std::move(cost), ControlSet::ball(radius));
}

/// A = B = C = 0 with g = |x|^2, so V(alpha, theta) = |alpha|^2.
inline OcProblem frozen_dynamics_problem(int grid_steps, int n = 2) {
  const TimeGrid g(grid_steps);
  CostSpec cost = CostSpec::zero(n, 1, n);
  cost.Q = MatrixXd::Identity(n, n);
  return OcProblem(g,
                   {MatrixPath::constant(g, MatrixXd::Zero(n, n)),
                    MatrixPath::constant(g, MatrixXd::Zero(n, 1)),
                    MatrixPath::constant(g, MatrixXd::Zero(n, n))},
                   std::move(cost), ControlSet::ball(1.0));
}

enum class EllipseClass { Interior, Boundary, Outside };

inline const char *to_string(EllipseClass c) {
  switch (c) {
  case EllipseClass::Interior:
    return "Interior";
  case EllipseClass::Boundary:
    return "Boundary";
  case EllipseClass::Outside:
    return "Outside";
  }
  return "?";
}

struct EllipseMembership {
  EllipseClass cls;
  double quadratic_value; // 12 a1^2 + 12 a1 a2 + 4 a2^2 - 1
};

inline EllipseMembership ellipse_membership(const Eigen::Vector2d &alpha) {
  const double a1 = alpha(0), a2 = alpha(1);
  const double q = 12 * a1 * a1 + 12 * a1 * a2 + 4 * a2 * a2 - 1;
  constexpr double tol = 1e-12;
  const EllipseClass c = q < -tol  ? EllipseClass::Interior
                         : q > tol ? EllipseClass::Outside
                                   : EllipseClass::Boundary;
  return {c, q};
}

struct AnalyticSolution {
  GridFn state;   // (x1, x2), the exact cubic and quadratic
  GridFn control; // u = x2'
};

/// Cubic closed form steering alpha to the origin at t = 1:
///   x1 = (2a1 + a2) t^3 - (3a1 + 2a2) t^2 + a2 t + a1,  x2 = x1',  u = x2'.
inline AnalyticSolution analytic_solution(const TimeGrid &grid,
                                          const Eigen::Vector2d &alpha) {
  if (ellipse_membership(alpha).cls == EllipseClass::Outside)
    throw OutsideRegion("analytic_solution: alpha outside the ellipse");
  const double a1 = alpha(0), a2 = alpha(1);
  const double c3 = 2 * a1 + a2, c2 = -(3 * a1 + 2 * a2);
  GridFn state = GridFn::sample(grid, 2, [&](double t) {
    Eigen::Vector2d v;
    v << ((c3 * t + c2) * t + a2) * t + a1, (3 * c3 * t + 2 * c2) * t + a2;
    return VectorXd(v);
  });
  GridFn control =
      GridFn::sample_scalar(grid, [&](double t) { return 6 * c3 * t + 2 * c2; });
  return {std::move(state), std::move(control)};
}

/// Central differences of V in alpha, one fresh solve per stencil point.
/// When the h and h/2 estimates disagree by more than 1e-6 the Richardson
/// combination (4 g_{h/2} - g_h) / 3 is returned.
inline VectorXd fd_value_gradient(const OcProblem &prob, const Parameter &w_bar,
                                  double h = 1e-3,
                                  const SolveOptions &opts = {}) {
  prob.check_parameter(w_bar);
  auto central = [&](double step) {
    const int n = prob.n();
    std::vector<std::future<double>> plus, minus;
    for (int i = 0; i < n; ++i) {
      for (int sign : {+1, -1}) {
        Parameter w = w_bar;
        w.alpha(i) += sign * step;
        auto fut = std::async(std::launch::async, [&prob, w, &opts] {
          return solve(prob, w, opts).value;
        });
        (sign > 0 ? plus : minus).push_back(std::move(fut));
      }
    }
    VectorXd g(n);
    for (int i = 0; i < n; ++i)
      g(i) = (plus[i].get() - minus[i].get()) / (2 * step);
    return g;
  };
  const VectorXd coarse = central(h);
  const VectorXd fine = central(0.5 * h);
  if ((coarse - fine).cwiseAbs().maxCoeff() <= 1e-6)
    return fine;
  return (4.0 * fine - coarse) / 3.0;
}

} // namespace ocstab
