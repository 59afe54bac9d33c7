/// @file
/// Projected-gradient solver for the discretized problem. Gradients come
/// from the discrete costate, so they are exact for the discrete cost.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ocstab/grid.hpp"
#include "ocstab/ode.hpp"
#include "ocstab/problem.hpp"

namespace ocstab {

struct SolveOptions {
  int max_iters = 5000;
  double step0 = 1.0;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double tol_opt = 1e-8;
  unsigned seed = 0;
  bool record_trace = false;

  void validate() const {
    if (max_iters <= 0 || !(step0 > 0) || !(armijo_c > 0) ||
        !(backtrack > 0 && backtrack < 1) || !(tol_opt > 0))
      throw std::invalid_argument("SolveOptions: invalid value");
  }
};

enum class BoundaryFlag { Interior, Boundary };

inline const char *to_string(BoundaryFlag f) {
  return f == BoundaryFlag::Interior ? "Interior" : "Boundary";
}

struct SolveResult {
  Trajectory x_bar;
  GridFn u_bar;
  double value = 0.0;
  int iterations = 0;
  double optimality_residual = 0.0;
  bool converged = false;
  std::optional<BoundaryFlag> boundary_flag; // set for L2 balls only
  std::vector<double> trace;                 // objective per accepted iterate
};

/// Euclidean (L2) projection onto the control set.
inline GridFn project(const ControlSet &set, const GridFn &u) {
  if (const L2Ball *ball = set.as_ball()) {
    const double nrm = lp_norm(u);
    return nrm <= ball->radius ? u : u * (ball->radius / nrm);
  }
  if (const Box *box = set.as_box()) {
    box->lower.require_same(u);
    return GridFn(u.grid(), u.values()
                                .cwiseMax(box->lower.values())
                                .cwiseMin(box->upper.values()));
  }
  return u;
}

namespace detail {

struct Evaluation {
  Trajectory x;
  double value;
  GridFn gradient;
};

inline GridFn gradient_from_adjoint(const OcProblem &prob, const GridFn &x,
                                    const GridFn &u, const GridFn &theta,
                                    const AdjointState &adj) {
  auto d = running_derivatives(prob, x, u, theta);
  return d.Lu - prob.B().apply_transpose(adj.y);
}

inline Evaluation evaluate(const OcProblem &prob, const GridFn &u,
                           const Parameter &w) {
  Trajectory x = integrate_state(prob, u, w);
  const double value = eval_cost(prob, x, u, w);
  const AdjointState adj = solve_discrete_adjoint(prob, x, u, w.theta);
  GridFn grad = gradient_from_adjoint(prob, x.state(), u, w.theta, adj);
  return {std::move(x), value, std::move(grad)};
}

} // namespace detail

/// Gradient of u -> J(x(u), u, w) under the trapezoidal L2 pairing:
/// t -> L_u - B^T y with y the discrete costate.
inline GridFn reduced_gradient(const OcProblem &prob, const GridFn &u,
                               const Parameter &w) {
  return detail::evaluate(prob, u, w).gradient;
}

/// |u - P(u - grad)|_2, zero exactly at stationary points.
inline double projection_residual(const ControlSet &set, const GridFn &u,
                                  const GridFn &grad) {
  return lp_norm(u - project(set, u - grad));
}

/// Projected gradient with Armijo backtracking along the projection arc and
/// Barzilai-Borwein trial steps, started from u = 0.
inline SolveResult solve(const OcProblem &prob, const Parameter &w,
                         const SolveOptions &opts = {}) {
  opts.validate();
  prob.check_parameter(w);
  const ControlSet &set = prob.control_set();

  GridFn u = GridFn::zeros(prob.grid(), prob.m());
  detail::Evaluation cur = detail::evaluate(prob, u, w);
  std::vector<double> trace;
  if (opts.record_trace)
    trace.push_back(cur.value);

  double step = opts.step0;
  double residual = projection_residual(set, u, cur.gradient);
  int iter = 0;
  for (; iter < opts.max_iters && residual > opts.tol_opt; ++iter) {
    double s = step;
    std::optional<GridFn> u_next;
    std::optional<detail::Evaluation> next;
    for (int bt = 0; bt < 200; ++bt, s *= opts.backtrack) {
      GridFn cand = project(set, u - s * cur.gradient);
      const GridFn du = cand - u;
      detail::Evaluation ev = detail::evaluate(prob, cand, w);
      const double slope = pairing(cur.gradient, du);
      // Once the change in J is at roundoff level the value difference is
      // noise; the decrease is then measured as <(g + g')/2, du>, exact for
      // quadratics (approximate Armijo condition).
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (1.0 + std::abs(cur.value));
      double change = ev.value - cur.value;
      if (std::abs(change) <= noise)
        change = 0.5 * pairing(cur.gradient + ev.gradient, du);
      if (change <= opts.armijo_c * slope) {
        u_next = std::move(cand);
        next = std::move(ev);
        break;
      }
    }
    if (!next)
      break; // line search stalled at roundoff level

    const GridFn su = *u_next - u;
    const GridFn sg = next->gradient - cur.gradient;
    const double sy = pairing(su, sg);
    step = sy > 0.0 ? std::clamp(pairing(su, su) / sy, 1e-12, 1e12)
                    : opts.step0;

    u = std::move(*u_next);
    cur = std::move(*next);
    residual = projection_residual(set, u, cur.gradient);
    if (opts.record_trace)
      trace.push_back(cur.value);
  }

  SolveResult out{cur.x, u, eval_cost(prob, cur.x, u, w), iter, residual,
                  residual <= opts.tol_opt, std::nullopt, std::move(trace)};
  if (const L2Ball *ball = set.as_ball()) {
    const double gap = std::abs(lp_norm(u) - ball->radius);
    out.boundary_flag = gap <= ball_boundary_tolerance(ball->radius)
                            ? BoundaryFlag::Boundary
                            : BoundaryFlag::Interior;
  }
  return out;
}

struct OptimalityCheck {
  bool ok = false;
  GridFn u_star;
  double residual = 0.0;
  ConeMembership membership;
};

/// Builds u* = B^T y - L_u from the costate at (x, u) and tests
/// u* in N(u; U).
inline OptimalityCheck verify_optimality(const OcProblem &prob,
                                         const Parameter &w,
                                         const Trajectory &x, const GridFn &u,
                                         double tol) {
  prob.check_parameter(w);
  const AdjointState adj = solve_discrete_adjoint(prob, x, u, w.theta);
  GridFn u_star =
      detail::gradient_from_adjoint(prob, x.state(), u, w.theta, adj) * -1.0;
  ConeMembership mem =
      normal_cone_membership(prob.control_set(), u, u_star, tol);
  return {mem.member, std::move(u_star), mem.residual, mem};
}

} // namespace ocstab
