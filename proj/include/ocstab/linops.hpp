/// @file
/// Discrete constraint operators of the abstract reformulation
///
///   M(x, u) = x - \int_0^t A x - \int_0^t B u,    T(alpha, theta) = alpha + \int_0^t C theta,
///
/// so that the state equation reads M(x, u) = T(w), and their adjoints
/// acting on dual elements (a, v) of R^n x L^q.
///
/// The adjoints are the exact transposes of the forward maps under the
/// discrete pairings, so the identities <M z, d> = <z, M* d> hold to
/// roundoff on any grid.
#pragma once

#include <cmath>

#include "ocstab/grid.hpp"
#include "ocstab/problem.hpp"

namespace ocstab {

/// Dual element acting on a trajectory by <a, x(0)> + \int v . xdot.
struct DualElement {
  VectorXd a;
  GridFn v;
};

/// Dual-space action <d, x>.
inline double x_pairing(const DualElement &d, const Trajectory &x) {
  if (d.a.size() != x.dim())
    throw DimensionError("x_pairing: dimension mismatch");
  return d.a.dot(x.initial()) + pairing(d.v, x.derivative());
}

inline Trajectory apply_M(const OcProblem &prob, const Trajectory &x,
                          const GridFn &u) {
  prob.check_state(x);
  prob.check_control(u);
  GridFn rate = x.derivative() - prob.A().apply(x.state()) - prob.B().apply(u);
  return Trajectory::from_derivative(x.initial(), std::move(rate));
}

inline Trajectory apply_T(const OcProblem &prob, const Parameter &w) {
  prob.check_parameter(w);
  return Trajectory::from_derivative(w.alpha, prob.C().apply(w.theta));
}

struct TStarImage {
  VectorXd a;
  GridFn fn; // dim k
};

/// T*(a, v) = (a, C^T v).
inline TStarImage apply_T_star(const OcProblem &prob, const DualElement &d) {
  return {d.a, prob.C().apply_transpose(d.v)};
}

struct MStarImage {
  DualElement x_part;
  GridFn u_part; // dim m
};

/// M*(a, v) = ((a - \int_0^1 A^T v, v - \int_t^1 A^T v), -B^T v).
inline MStarImage apply_M_star(const OcProblem &prob, const DualElement &d) {
  if (d.a.size() != prob.n() || d.v.dim() != prob.n())
    throw DimensionError("apply_M_star: dual element has wrong dimension");
  const GridFn atv = prob.A().apply_transpose(d.v);
  DualElement xp{d.a - integral(atv), d.v - tail_integral(atv)};
  return {std::move(xp), prob.B().apply_transpose(d.v) * -1.0};
}

/// |<M(x,u), d> - <(x,u), M* d>|.
inline double adjoint_identity_residual(const OcProblem &prob,
                                        const Trajectory &x, const GridFn &u,
                                        const DualElement &d) {
  const double lhs = x_pairing(d, apply_M(prob, x, u));
  const MStarImage img = apply_M_star(prob, d);
  const double rhs = x_pairing(img.x_part, x) + pairing(img.u_part, u);
  return std::abs(lhs - rhs);
}

/// |<T(w), d> - (<a, alpha> + \int theta . C^T v)|.
inline double t_star_identity_residual(const OcProblem &prob,
                                       const Parameter &w,
                                       const DualElement &d) {
  const double lhs = x_pairing(d, apply_T(prob, w));
  const TStarImage img = apply_T_star(prob, d);
  const double rhs = img.a.dot(w.alpha) + pairing(w.theta, img.fn);
  return std::abs(lhs - rhs);
}

} // namespace ocstab
