/// @file
/// Implicit trapezoidal (Crank-Nicolson) integrators for the state equation,
/// the backward costate equation and the homogeneous adjoint system.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ocstab/grid.hpp"
#include "ocstab/problem.hpp"

namespace ocstab {

/// Costate path y on the grid together with its terminal value y(t_N).
struct AdjointState {
  GridFn y;
  VectorXd terminal;
};

namespace detail {

/// Factorization of I + s*M(t_i) (or its transpose) for every node, reusing a
/// single factorization when M is constant.
class StepSolver {
public:
  StepSolver(const MatrixPath &M, double s, bool transpose)
      : M_(M), s_(s), transpose_(transpose) {
    if (M.is_constant()) {
      cached_.emplace_back(lu_at(0));
      constant_singular_ = !cached_.front().isInvertible();
    }
  }

  template <class Rhs> auto solve(int node, const Rhs &rhs) const {
    if (!cached_.empty()) {
      if (constant_singular_) // reported at the first node that needs it
        throw StepSingular(node);
      return cached_.front().solve(rhs).eval();
    }
    return factor(node).solve(rhs).eval();
  }

private:
  Eigen::FullPivLU<MatrixXd> lu_at(int node) const {
    const MatrixXd &m = M_.at(node);
    MatrixXd step = MatrixXd::Identity(m.rows(), m.cols()) +
                    s_ * (transpose_ ? MatrixXd(m.transpose()) : m);
    return Eigen::FullPivLU<MatrixXd>(step);
  }

  Eigen::FullPivLU<MatrixXd> factor(int node) const {
    Eigen::FullPivLU<MatrixXd> lu = lu_at(node);
    if (!lu.isInvertible())
      throw StepSingular(node);
    return lu;
  }

  const MatrixPath &M_;
  double s_;
  bool transpose_;
  std::vector<Eigen::FullPivLU<MatrixXd>> cached_;
  bool constant_singular_ = false;
};

inline MatrixXd step_matrix(const MatrixXd &m, double s, bool transpose) {
  return MatrixXd::Identity(m.rows(), m.cols()) +
         s * (transpose ? MatrixXd(m.transpose()) : m);
}

} // namespace detail

/// Solves xdot = A x + B u + C theta, x(0) = alpha.
inline Trajectory integrate_state(const OcProblem &prob, const GridFn &u,
                                  const Parameter &w) {
  prob.check_control(u);
  prob.check_parameter(w);
  const TimeGrid &g = prob.grid();
  const double hh = 0.5 * g.h();
  const MatrixXd forcing =
      prob.B().apply(u).values() + prob.C().apply(w.theta).values();
  detail::StepSolver lhs(prob.A(), -hh, false);

  MatrixXd x(prob.n(), g.n_nodes());
  x.col(0) = w.alpha;
  for (int i = 0; i < g.n_steps(); ++i) {
    const VectorXd rhs = x.col(i) + hh * (prob.A().at(i) * x.col(i)) +
                         hh * (forcing.col(i) + forcing.col(i + 1));
    x.col(i + 1) = lhs.solve(i + 1, rhs);
  }
  MatrixXd dx(prob.n(), g.n_nodes());
  for (int i = 0; i < g.n_nodes(); ++i)
    dx.col(i) = prob.A().at(i) * x.col(i) + forcing.col(i);
  return Trajectory(GridFn(g, std::move(x)), GridFn(g, std::move(dx)));
}

/// Backward trapezoidal solution of ydot + A^T y = L_x, y(1) = -g'(x(1)).
/// The terminal condition holds exactly.
inline AdjointState solve_adjoint(const OcProblem &prob, const Trajectory &x,
                                  const GridFn &u, const GridFn &theta) {
  prob.check_state(x);
  prob.check_control(u);
  const TimeGrid &g = prob.grid();
  const double hh = 0.5 * g.h();
  const auto d = running_derivatives(prob, x.state(), u, theta);
  const auto &lx = d.Lx.values();
  detail::StepSolver lhs(prob.A(), -hh, true);

  const VectorXd terminal =
      -prob.cost_model().terminal_gradient(x.terminal());
  MatrixXd y(prob.n(), g.n_nodes());
  y.col(g.n_steps()) = terminal;
  for (int i = g.n_steps() - 1; i >= 0; --i) {
    const VectorXd rhs = y.col(i + 1) +
                         hh * (prob.A().at(i + 1).transpose() * y.col(i + 1)) -
                         hh * (lx.col(i) + lx.col(i + 1));
    y.col(i) = lhs.solve(i, rhs);
  }
  return {GridFn(g, std::move(y)), terminal};
}

/// Costate of the discretized problem: the multipliers of the trapezoidal
/// state recursion, mapped to nodes so that for every node
///   dJ/du  = L_u - B^T y,   dJ/dtheta = L_theta - C^T y,
///   dJ/dalpha = g'(x(1)) + \int L_x - \int A^T y
/// are the exact gradients (Riesz representatives under `pairing`) of the
/// discrete cost. Agrees with solve_adjoint to O(h^2) at interior nodes; the
/// end nodes sit half a cell inward, so y(t_N) = -g'(x(1)) + O(h).
inline AdjointState solve_discrete_adjoint(const OcProblem &prob,
                                           const Trajectory &x,
                                           const GridFn &u,
                                           const GridFn &theta) {
  prob.check_state(x);
  prob.check_control(u);
  const TimeGrid &g = prob.grid();
  const int last = g.n_steps();
  const double hh = 0.5 * g.h();
  const auto d = running_derivatives(prob, x.state(), u, theta);
  const auto &lx = d.Lx.values();
  detail::StepSolver lhs(prob.A(), -hh, true);

  // lambda_j multiplies the step constraint on [t_{j-1}, t_j].
  MatrixXd lambda(prob.n(), g.n_nodes());
  const VectorXd gp = prob.cost_model().terminal_gradient(x.terminal());
  lambda.col(last) = lhs.solve(last, VectorXd(-gp - g.weight(last) * lx.col(last)));
  for (int j = last - 1; j >= 1; --j) {
    const VectorXd rhs = lambda.col(j + 1) +
                         hh * (prob.A().at(j).transpose() * lambda.col(j + 1)) -
                         g.weight(j) * lx.col(j);
    lambda.col(j) = lhs.solve(j, rhs);
  }
  MatrixXd y(prob.n(), g.n_nodes());
  y.col(0) = lambda.col(1);
  for (int j = 1; j < last; ++j)
    y.col(j) = 0.5 * (lambda.col(j) + lambda.col(j + 1));
  y.col(last) = lambda.col(last);
  VectorXd terminal = y.col(last);
  return {GridFn(g, std::move(y)), std::move(terminal)};
}

/// Fundamental matrix of vdot = -A^T v with Phi(0) = I.
inline std::vector<MatrixXd> transition_matrix(const OcProblem &prob) {
  const TimeGrid &g = prob.grid();
  const int n = prob.n();
  const double hh = 0.5 * g.h();
  detail::StepSolver lhs(prob.A(), hh, true);
  std::vector<MatrixXd> phi(g.n_nodes());
  phi[0] = MatrixXd::Identity(n, n);
  for (int i = 0; i < g.n_steps(); ++i) {
    const MatrixXd rhs =
        detail::step_matrix(prob.A().at(i), -hh, true) * phi[i];
    phi[i + 1] = lhs.solve(i + 1, rhs);
  }
  return phi;
}

/// Solutions v(0) of the fixed-point system v(0) = \int_0^1 A^T v,
/// vdot = -A^T v, expressed through K = \int_0^1 A^T Phi.
struct SingularSystem {
  MatrixXd K;
  std::vector<VectorXd> kernel_basis; // orthonormal basis of ker(I - K)
  double sigma_min = 0.0;             // smallest singular value of I - K
  double sigma_min_phi1 = 0.0;        // smallest singular value of Phi(1)
  std::vector<MatrixXd> phi;
};

/// Orthonormal basis of ker(I - K) with rank threshold 1e-8 * sigma_max.
inline std::vector<VectorXd> fixed_point_kernel(const MatrixXd &K,
                                                double *sigma_min = nullptr) {
  const MatrixXd I_K = MatrixXd::Identity(K.rows(), K.cols()) - K;
  Eigen::JacobiSVD<MatrixXd> svd(I_K, Eigen::ComputeFullV);
  const auto &s = svd.singularValues();
  if (sigma_min)
    *sigma_min = s.minCoeff();
  const double cut = 1e-8 * s.maxCoeff();
  std::vector<VectorXd> basis;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) <= cut)
      basis.push_back(svd.matrixV().col(i));
  return basis;
}

inline SingularSystem solve_singular_system(const OcProblem &prob) {
  SingularSystem out;
  out.phi = transition_matrix(prob);
  const TimeGrid &g = prob.grid();
  out.K = MatrixXd::Zero(prob.n(), prob.n());
  for (int i = 0; i < g.n_nodes(); ++i)
    out.K += g.weight(i) * prob.A().at(i).transpose() * out.phi[i];
  out.kernel_basis = fixed_point_kernel(out.K, &out.sigma_min);
  out.sigma_min_phi1 = Eigen::JacobiSVD<MatrixXd>(out.phi.back())
                           .singularValues()
                           .minCoeff();
  return out;
}

} // namespace ocstab
