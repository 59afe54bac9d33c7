/// @file
/// Subdifferential and singular subdifferential of the optimal value
/// function V(alpha, theta) at a solved parameter.
///
/// For a solution (x, u) at w = (alpha, theta), with y the costate of
///   ydot + A^T y = L_x,  y(1) = -g'(x(1)),
/// the candidate
///   alpha* = g'(x(1)) + \int L_x - \int A^T y,   theta* = L_theta - C^T y
/// is the only possible element of dV(w); it belongs to dV(w) exactly when
/// u* = B^T y - L_u lies in the normal cone N(u; U). The singular
/// subdifferential is described by the homogeneous system
///   vdot = -A^T v,  v(0) = alpha* = \int A^T v,  theta* = C^T v,
/// filtered by -B^T v in N(u; U).
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ocstab/grid.hpp"
#include "ocstab/ode.hpp"
#include "ocstab/problem.hpp"
#include "ocstab/solver.hpp"

namespace ocstab {

enum class SubdiffStatus { Singleton, Empty };
enum class SingularStatus { ZeroOnly, Subspace };

inline const char *to_string(SubdiffStatus s) {
  return s == SubdiffStatus::Singleton ? "Singleton" : "Empty";
}
inline const char *to_string(SingularStatus s) {
  return s == SingularStatus::ZeroOnly ? "ZeroOnly" : "Subspace";
}

struct SubdiffResult {
  SubdiffStatus status = SubdiffStatus::Empty;
  VectorXd alpha_star;
  GridFn theta_star;
  GridFn u_star;
  AdjointState adjoint;
  ConeMembership certificate;
  double tol_member = 0.0;
  bool borderline = false; // residual in (tol_member, 10 tol_member]
  bool assumptions_verified = false;
  double c3 = 0.0;
};

/// `optimality_residual` is the solver's certificate; it widens the
/// membership tolerance to max(tol, 10 * optimality_residual).
inline SubdiffResult compute_subdifferential(const OcProblem &prob,
                                             const Parameter &w,
                                             const Trajectory &x,
                                             const GridFn &u, double tol,
                                             double optimality_residual = 0.0) {
  prob.check_parameter(w);
  prob.check_state(x);
  prob.check_control(u);
  const double tol_member = std::max(tol, 10.0 * optimality_residual);

  AdjointState adj = solve_discrete_adjoint(prob, x, u, w.theta);
  const auto d = running_derivatives(prob, x.state(), u, w.theta);
  const VectorXd gp = prob.cost_model().terminal_gradient(x.terminal());

  VectorXd alpha_star =
      gp + integral(d.Lx) - integral(prob.A().apply_transpose(adj.y));
  GridFn theta_star = d.Ltheta - prob.C().apply_transpose(adj.y);
  GridFn u_star = prob.B().apply_transpose(adj.y) - d.Lu;

  const ConeMembership loose =
      normal_cone_membership(prob.control_set(), u, u_star, 10.0 * tol_member);
  if (!loose.member)
    throw NotOptimal("input pair fails the optimality certificate (cone "
                     "residual " +
                     std::to_string(loose.residual) + ")");
  ConeMembership tight =
      normal_cone_membership(prob.control_set(), u, u_star, tol_member);

  const A5Check a5 = check_A5(prob.C());
  SubdiffResult out{tight.member ? SubdiffStatus::Singleton
                                 : SubdiffStatus::Empty,
                    std::move(alpha_star),
                    std::move(theta_star),
                    std::move(u_star),
                    std::move(adj),
                    tight,
                    tol_member,
                    !tight.member,
                    a5.holds,
                    a5.c3};
  return out;
}

/// One admissible direction of the singular subdifferential.
struct SingularElement {
  VectorXd alpha_star;
  GridFn theta_star;
  GridFn u_star;
};

struct SingularSubdiffResult {
  SingularStatus status = SingularStatus::ZeroOnly;
  std::vector<SingularElement> basis;
  double sigma_min = 0.0;      // of I - K
  double sigma_min_phi1 = 0.0; // of Phi(1)
};

/// Filters the kernel of the fixed-point system by the cone condition. Split
/// out so a synthetic system can be injected.
inline SingularSubdiffResult
singular_subdifferential_from_system(const OcProblem &prob, const GridFn &u,
                                     const SingularSystem &sys, double tol) {
  prob.check_control(u);
  SingularSubdiffResult out;
  out.sigma_min = sys.sigma_min;
  out.sigma_min_phi1 = sys.sigma_min_phi1;
  const TimeGrid &g = prob.grid();
  for (const VectorXd &b : sys.kernel_basis) {
    MatrixXd v(prob.n(), g.n_nodes());
    for (int i = 0; i < g.n_nodes(); ++i)
      v.col(i) = sys.phi[i] * b;
    const GridFn vpath(g, std::move(v));
    GridFn u_star = prob.B().apply_transpose(vpath) * -1.0;
    if (!normal_cone_membership(prob.control_set(), u, u_star, tol).member)
      continue;
    out.basis.push_back({b, prob.C().apply_transpose(vpath), std::move(u_star)});
  }
  out.status =
      out.basis.empty() ? SingularStatus::ZeroOnly : SingularStatus::Subspace;
  return out;
}

inline SingularSubdiffResult
compute_singular_subdifferential(const OcProblem &prob, const Parameter &w,
                                 const GridFn &u, double tol) {
  prob.check_parameter(w);
  return singular_subdifferential_from_system(prob, u,
                                              solve_singular_system(prob), tol);
}

struct SubgradientTrial {
  double value = 0.0;       // V(w)
  double lower_bound = 0.0; // V(w_bar) + <g, w - w_bar>
  double tolerance = 0.0;
  bool ok = false;
};

struct SubgradientReport {
  double value_bar = 0.0;
  std::vector<SubgradientTrial> trials;
  int violations = 0;
  double worst_margin = 0.0; // min over trials of V(w) - lower_bound
};

/// Checks V(w) - V(w_bar) >= <alpha*, alpha - alpha_bar>
///                             + pairing(theta*, theta - theta_bar) - tol
/// with tol = tol_abs + tol_rel * |w - w_bar|.
inline SubgradientReport
subgradient_inequality_check(const OcProblem &prob, const Parameter &w_bar,
                             const VectorXd &alpha_star,
                             const GridFn &theta_star,
                             const std::vector<Parameter> &trial_params,
                             const SolveOptions &opts = {},
                             double tol_abs = 1e-6, double tol_rel = 1e-3) {
  SubgradientReport rep;
  rep.value_bar = solve(prob, w_bar, opts).value;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (const Parameter &w : trial_params) {
    const VectorXd da = w.alpha - w_bar.alpha;
    const GridFn dth = w.theta - w_bar.theta;
    SubgradientTrial t;
    t.value = solve(prob, w, opts).value;
    t.lower_bound =
        rep.value_bar + alpha_star.dot(da) + pairing(theta_star, dth);
    const double dist = std::sqrt(da.squaredNorm() + pairing(dth, dth));
    t.tolerance = tol_abs + tol_rel * dist;
    t.ok = t.value >= t.lower_bound - t.tolerance;
    rep.worst_margin = std::min(rep.worst_margin, t.value - t.lower_bound);
    rep.violations += t.ok ? 0 : 1;
    rep.trials.push_back(t);
  }
  return rep;
}

} // namespace ocstab
