/// @file
/// Problem data for the parametric linear-quadratic control problem
///
///   minimize   g(x(1)) + \int_0^1 L(t, x, u, theta) dt
///   subject to xdot = A x + B u + C theta,  x(0) = alpha,  u in U,
///
/// together with cost evaluation, cost gradients, normal cones of the
/// control set and the sufficient regularity check on C.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ocstab/errors.hpp"
#include "ocstab/grid.hpp"

namespace ocstab {

/// Matrix-valued function sampled on the grid; a single stored sample means
/// the function is constant.
class MatrixPath {
public:
  static MatrixPath constant(TimeGrid grid, MatrixXd m) {
    return MatrixPath(grid, std::vector<MatrixXd>{std::move(m)});
  }

  static MatrixPath samples(TimeGrid grid, std::vector<MatrixXd> s) {
    if (static_cast<int>(s.size()) != grid.n_nodes())
      throw DimensionError("MatrixPath: expected " +
                           std::to_string(grid.n_nodes()) + " samples, got " +
                           std::to_string(s.size()));
    return MatrixPath(grid, std::move(s));
  }

  const TimeGrid &grid() const { return grid_; }
  int rows() const { return static_cast<int>(samples_.front().rows()); }
  int cols() const { return static_cast<int>(samples_.front().cols()); }
  bool is_constant() const { return samples_.size() == 1; }
  const MatrixXd &at(int i) const {
    return is_constant() ? samples_.front() : samples_[i];
  }

  /// Nodewise product t -> M(t) f(t).
  GridFn apply(const GridFn &f) const {
    if (!(f.grid() == grid_) || f.dim() != cols())
      throw DimensionError("MatrixPath::apply: operand mismatch");
    MatrixXd out(rows(), f.n_nodes());
    for (int i = 0; i < f.n_nodes(); ++i)
      out.col(i) = at(i) * f.at(i);
    return GridFn(grid_, std::move(out));
  }

  /// Nodewise product t -> M(t)^T f(t).
  GridFn apply_transpose(const GridFn &f) const {
    if (!(f.grid() == grid_) || f.dim() != rows())
      throw DimensionError("MatrixPath::apply_transpose: operand mismatch");
    MatrixXd out(cols(), f.n_nodes());
    for (int i = 0; i < f.n_nodes(); ++i)
      out.col(i) = at(i).transpose() * f.at(i);
    return GridFn(grid_, std::move(out));
  }

private:
  MatrixPath(TimeGrid grid, std::vector<MatrixXd> s)
      : grid_(grid), samples_(std::move(s)) {
    if (samples_.empty())
      throw DimensionError("MatrixPath: no samples");
    for (const auto &m : samples_) {
      if (m.rows() != samples_.front().rows() ||
          m.cols() != samples_.front().cols())
        throw DimensionError("MatrixPath: inconsistent sample shapes");
      if (!m.allFinite())
        throw ValidationError("MatrixPath", "non-finite entry");
    }
  }

  TimeGrid grid_;
  std::vector<MatrixXd> samples_;
};

struct SystemMatrices {
  MatrixPath A; // n x n
  MatrixPath B; // n x m
  MatrixPath C; // n x k
};

/// g(x) = x'Qx + q'x + c0 and
/// L(x,u,theta) = x'Rx x + u'Ru u + theta'Rtheta theta
///                + rx'x + ru'u + rtheta'theta + r0.
struct CostSpec {
  MatrixXd Q;
  VectorXd q;
  double c0 = 0.0;
  MatrixXd Rx;
  MatrixXd Ru;
  MatrixXd Rtheta;
  VectorXd rx;
  VectorXd ru;
  VectorXd rtheta;
  double r0 = 0.0;

  /// All-zero cost of the given dimensions.
  static CostSpec zero(int n, int m, int k) {
    CostSpec c;
    c.Q = MatrixXd::Zero(n, n);
    c.q = VectorXd::Zero(n);
    c.Rx = MatrixXd::Zero(n, n);
    c.Ru = MatrixXd::Zero(m, m);
    c.Rtheta = MatrixXd::Zero(k, k);
    c.rx = VectorXd::Zero(n);
    c.ru = VectorXd::Zero(m);
    c.rtheta = VectorXd::Zero(k);
    return c;
  }
};

/// Running cost value and its partial derivatives at one node.
struct RunningTerms {
  double value = 0.0;
  VectorXd Lx, Lu, Ltheta;
};

/// Evaluator for a convex C^1 cost. The quadratic file-format cost is one
/// implementation; callers can supply others through OcProblem.
class CostModel {
public:
  virtual ~CostModel() = default;
  virtual double terminal(const VectorXd &x) const = 0;
  virtual VectorXd terminal_gradient(const VectorXd &x) const = 0;
  virtual RunningTerms running(double t, const VectorXd &x, const VectorXd &u,
                               const VectorXd &theta) const = 0;
};

class QuadraticCost final : public CostModel {
public:
  explicit QuadraticCost(CostSpec spec) : s_(std::move(spec)) {}

  double terminal(const VectorXd &x) const override {
    return x.dot(s_.Q * x) + s_.q.dot(x) + s_.c0;
  }
  VectorXd terminal_gradient(const VectorXd &x) const override {
    return 2.0 * s_.Q * x + s_.q;
  }
  RunningTerms running(double, const VectorXd &x, const VectorXd &u,
                       const VectorXd &theta) const override {
    RunningTerms r;
    const VectorXd Rxx = s_.Rx * x, Ruu = s_.Ru * u, Rtt = s_.Rtheta * theta;
    r.value = x.dot(Rxx) + u.dot(Ruu) + theta.dot(Rtt) + s_.rx.dot(x) +
              s_.ru.dot(u) + s_.rtheta.dot(theta) + s_.r0;
    r.Lx = 2.0 * Rxx + s_.rx;
    r.Lu = 2.0 * Ruu + s_.ru;
    r.Ltheta = 2.0 * Rtt + s_.rtheta;
    return r;
  }

  const CostSpec &spec() const { return s_; }

private:
  CostSpec s_;
};

struct Unconstrained {};
struct L2Ball {
  double radius = 1.0;
};
struct Box {
  GridFn lower;
  GridFn upper;
};

/// Convex control set with nonempty interior.
class ControlSet {
public:
  using Kind = std::variant<Unconstrained, L2Ball, Box>;

  static ControlSet unconstrained() { return ControlSet(Unconstrained{}); }
  static ControlSet ball(double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw ValidationError("control_set.radius", "must be positive");
    return ControlSet(L2Ball{radius});
  }
  static ControlSet box(GridFn lower, GridFn upper) {
    lower.require_same(upper);
    if (!((upper.values() - lower.values()).array() > 0.0).all())
      throw ValidationError("control_set.lower",
                            "lower must be strictly below upper at every node");
    return ControlSet(Box{std::move(lower), std::move(upper)});
  }

  const Kind &kind() const { return kind_; }
  const L2Ball *as_ball() const { return std::get_if<L2Ball>(&kind_); }
  const Box *as_box() const { return std::get_if<Box>(&kind_); }
  bool is_unconstrained() const {
    return std::holds_alternative<Unconstrained>(kind_);
  }
  std::string name() const {
    return as_ball() ? "l2ball" : (as_box() ? "box" : "unconstrained");
  }

private:
  explicit ControlSet(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

/// Perturbation pair w = (alpha, theta).
struct Parameter {
  VectorXd alpha;
  GridFn theta;
};

namespace detail {

inline void require_psd(const MatrixXd &M, int dim, const std::string &field) {
  if (M.rows() != dim || M.cols() != dim)
    throw ValidationError(field, "expected " + std::to_string(dim) + "x" +
                                     std::to_string(dim) + " matrix");
  if (!M.allFinite())
    throw ValidationError(field, "non-finite entry");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))
    throw ValidationError(field, "matrix is not symmetric");
  if (dim == 0)
    return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin < -1e-12)
    throw ValidationError(field, "matrix is not positive semidefinite (min "
                                 "eigenvalue " +
                                     std::to_string(lmin) + ")");
}

inline void require_vec(const VectorXd &v, int dim, const std::string &field) {
  if (v.size() != dim)
    throw ValidationError(field,
                          "expected vector of length " + std::to_string(dim));
  if (!v.allFinite())
    throw ValidationError(field, "non-finite entry");
}

} // namespace detail

/// Validates the declarative cost against dimensions (n, m, k).
inline void validate_cost(const CostSpec &c, int n, int m, int k) {
  detail::require_psd(c.Q, n, "cost.Q");
  detail::require_vec(c.q, n, "cost.q");
  detail::require_psd(c.Rx, n, "cost.Rx");
  detail::require_psd(c.Ru, m, "cost.Ru");
  detail::require_psd(c.Rtheta, k, "cost.Rtheta");
  detail::require_vec(c.rx, n, "cost.rx");
  detail::require_vec(c.ru, m, "cost.ru");
  detail::require_vec(c.rtheta, k, "cost.rtheta");
  if (!std::isfinite(c.c0))
    throw ValidationError("cost.c0", "non-finite");
  if (!std::isfinite(c.r0))
    throw ValidationError("cost.r0", "non-finite");
}

class OcProblem {
public:
  OcProblem(TimeGrid grid, SystemMatrices mats, CostSpec cost,
            ControlSet control_set)
      : grid_(grid), mats_(std::move(mats)), cost_(std::move(cost)),
        control_set_(std::move(control_set)) {
    n_ = mats_.A.rows();
    m_ = mats_.B.cols();
    k_ = mats_.C.cols();
    validate();
    model_ = std::make_shared<QuadraticCost>(cost_);
  }

  /// Replaces the quadratic evaluator with a caller-supplied convex cost.
  /// The declarative CostSpec is kept only for serialization.
  OcProblem with_cost_model(std::shared_ptr<const CostModel> model) const {
    OcProblem p = *this;
    p.model_ = std::move(model);
    return p;
  }

  int n() const { return n_; }
  int m() const { return m_; }
  int k() const { return k_; }
  const TimeGrid &grid() const { return grid_; }
  const SystemMatrices &matrices() const { return mats_; }
  const MatrixPath &A() const { return mats_.A; }
  const MatrixPath &B() const { return mats_.B; }
  const MatrixPath &C() const { return mats_.C; }
  const CostSpec &cost() const { return cost_; }
  const CostModel &cost_model() const { return *model_; }
  const ControlSet &control_set() const { return control_set_; }

  void check_parameter(const Parameter &w) const {
    if (w.alpha.size() != n_)
      throw DimensionError("parameter.alpha: expected length " +
                           std::to_string(n_));
    if (!(w.theta.grid() == grid_) || w.theta.dim() != k_)
      throw DimensionError("parameter.theta: expected dim " +
                           std::to_string(k_) + " on the problem grid");
  }
  void check_control(const GridFn &u) const {
    if (!(u.grid() == grid_) || u.dim() != m_)
      throw DimensionError("control: expected dim " + std::to_string(m_) +
                           " on the problem grid");
  }
  void check_state(const Trajectory &x) const {
    if (!(x.grid() == grid_) || x.dim() != n_)
      throw DimensionError("state: expected dim " + std::to_string(n_) +
                           " on the problem grid");
  }

  Parameter zero_parameter(VectorXd alpha) const {
    return Parameter{std::move(alpha), GridFn::zeros(grid_, k_)};
  }

private:
  void validate() const {
    if (mats_.A.cols() != n_)
      throw ValidationError("A", "must be square");
    if (mats_.B.rows() != n_)
      throw ValidationError("B", "must have n rows");
    if (mats_.C.rows() != n_)
      throw ValidationError("C", "must have n rows");
    if (!(mats_.A.grid() == grid_) || !(mats_.B.grid() == grid_) ||
        !(mats_.C.grid() == grid_))
      throw ValidationError("grid_steps", "matrices sampled on another grid");
    validate_cost(cost_, n_, m_, k_);
    if (const Box *b = control_set_.as_box()) {
      if (!(b->lower.grid() == grid_) || b->lower.dim() != m_)
        throw ValidationError("control_set.lower",
                              "expected dim m on the problem grid");
    }
  }

  TimeGrid grid_;
  SystemMatrices mats_;
  CostSpec cost_;
  ControlSet control_set_;
  std::shared_ptr<const CostModel> model_;
  int n_ = 0, m_ = 0, k_ = 0;
};

/// J(x, u, w) = g(x(1)) + trapezoidal \int_0^1 L.
inline double eval_cost(const OcProblem &prob, const Trajectory &x,
                        const GridFn &u, const Parameter &w) {
  prob.check_state(x);
  prob.check_control(u);
  prob.check_parameter(w);
  const auto &model = prob.cost_model();
  const TimeGrid &g = prob.grid();
  double acc = model.terminal(x.terminal());
  for (int i = 0; i < g.n_nodes(); ++i)
    acc += g.weight(i) *
           model
               .running(g.t(i), x.state().at(i), u.at(i), w.theta.at(i))
               .value;
  return acc;
}

/// Nodal partial derivatives of the running cost along (x, u, theta).
struct RunningDerivatives {
  GridFn Lx, Lu, Ltheta;
};

inline RunningDerivatives running_derivatives(const OcProblem &prob,
                                              const GridFn &x, const GridFn &u,
                                              const GridFn &theta) {
  const TimeGrid &g = prob.grid();
  MatrixXd lx(prob.n(), g.n_nodes()), lu(prob.m(), g.n_nodes()),
      lt(prob.k(), g.n_nodes());
  for (int i = 0; i < g.n_nodes(); ++i) {
    auto r = prob.cost_model().running(g.t(i), x.at(i), u.at(i), theta.at(i));
    lx.col(i) = r.Lx;
    lu.col(i) = r.Lu;
    lt.col(i) = r.Ltheta;
  }
  return {GridFn(g, std::move(lx)), GridFn(g, std::move(lu)),
          GridFn(g, std::move(lt))};
}

/// Gradient of J at (x, u, theta). The x-part is an element
/// (Jx_vec, Jx_fn) of R^n x L^q acting on trajectories through
/// <Jx_vec, d(0)> + pairing(Jx_fn, ddot).
struct CostGradients {
  VectorXd g_prime_at_1;
  VectorXd Jx_vec;
  GridFn Jx_fn;
  GridFn Ju;
  GridFn Jtheta;
};

inline CostGradients cost_gradients(const OcProblem &prob, const Trajectory &x,
                                    const GridFn &u, const GridFn &theta) {
  prob.check_state(x);
  prob.check_control(u);
  prob.check_parameter(Parameter{VectorXd::Zero(prob.n()), theta});
  const VectorXd gp = prob.cost_model().terminal_gradient(x.terminal());
  auto d = running_derivatives(prob, x.state(), u, theta);
  const VectorXd jx_vec = gp + integral(d.Lx);
  MatrixXd jx_fn = tail_integral(d.Lx).values();
  jx_fn.colwise() += gp;
  return {gp, jx_vec, GridFn(prob.grid(), std::move(jx_fn)), std::move(d.Lu),
          std::move(d.Ltheta)};
}

/// Directional derivative of J along (dx, du, dtheta) from its gradient.
inline double directional_derivative(const CostGradients &g,
                                     const Trajectory &dx, const GridFn &du,
                                     const GridFn &dtheta) {
  return g.Jx_vec.dot(dx.initial()) + pairing(g.Jx_fn, dx.derivative()) +
         pairing(g.Ju, du) + pairing(g.Jtheta, dtheta);
}

enum class ConeBranch { Unconstrained, BallInterior, BallBoundary, Box };

inline const char *to_string(ConeBranch b) {
  switch (b) {
  case ConeBranch::Unconstrained:
    return "unconstrained";
  case ConeBranch::BallInterior:
    return "ball_interior";
  case ConeBranch::BallBoundary:
    return "ball_boundary";
  case ConeBranch::Box:
    return "box";
  }
  return "?";
}

/// Outcome of testing u* in N(u_bar; U). `residual` is the L2 distance from
/// u* to the cone; `lambda` is the ray multiplier on the ball boundary.
struct ConeMembership {
  bool member = false;
  double residual = 0.0;
  std::optional<double> lambda;
  ConeBranch branch = ConeBranch::Unconstrained;
};

/// Relative boundary tolerance of the L2 ball.
inline double ball_boundary_tolerance(double radius) { return 1e-8 * radius; }

namespace detail {
inline bool at_bound(double u, double bound) {
  return std::abs(u - bound) <= 1e-9 * (1.0 + std::abs(bound));
}
} // namespace detail

inline ConeMembership normal_cone_membership(const ControlSet &set,
                                             const GridFn &u_bar,
                                             const GridFn &u_star, double tol) {
  u_bar.require_same(u_star);
  ConeMembership out;
  if (set.is_unconstrained()) {
    out.branch = ConeBranch::Unconstrained;
    out.residual = lp_norm(u_star);
    out.member = out.residual <= tol;
    return out;
  }
  if (const L2Ball *ball = set.as_ball()) {
    const double rho = ball->radius;
    const double tol_bnd = ball_boundary_tolerance(rho);
    const double nrm = lp_norm(u_bar);
    if (nrm > rho + std::max(tol, tol_bnd))
      throw FeasibilityError("control outside the L2 ball: norm " +
                             std::to_string(nrm) + " > " + std::to_string(rho));
    if (nrm < rho - tol_bnd) {
      out.branch = ConeBranch::BallInterior;
      out.residual = lp_norm(u_star);
      out.lambda = 0.0;
      out.member = out.residual <= tol;
      return out;
    }
    out.branch = ConeBranch::BallBoundary;
    const double lambda = pairing(u_star, u_bar) / (nrm * nrm);
    out.lambda = lambda;
    out.residual = lambda >= 0.0 ? lp_norm(u_star - lambda * u_bar)
                                 : lp_norm(u_star);
    out.member = lambda >= -tol && out.residual <= tol;
    return out;
  }
  const Box &box = *set.as_box();
  box.lower.require_same(u_bar);
  out.branch = ConeBranch::Box;
  const TimeGrid &g = u_bar.grid();
  double max_violation = 0.0, acc = 0.0;
  for (int i = 0; i < g.n_nodes(); ++i) {
    double node_sq = 0.0;
    for (int c = 0; c < u_bar.dim(); ++c) {
      const double ub = u_bar(c, i), lo = box.lower(c, i), hi = box.upper(c, i);
      const double slack = std::max(tol, 1e-9 * (1.0 + std::abs(hi - lo)));
      if (ub < lo - slack || ub > hi + slack)
        throw FeasibilityError("control outside the box at node " +
                               std::to_string(i));
      const double s = u_star(c, i);
      double viol;
      if (detail::at_bound(ub, hi))
        viol = std::max(0.0, -s); // cone is [0, inf)
      else if (detail::at_bound(ub, lo))
        viol = std::max(0.0, s); // cone is (-inf, 0]
      else
        viol = std::abs(s);
      max_violation = std::max(max_violation, viol);
      node_sq += viol * viol;
    }
    acc += g.weight(i) * node_sq;
  }
  out.residual = std::sqrt(acc);
  out.member = max_violation <= tol;
  return out;
}

struct A5Check {
  bool holds = false;
  double c3 = 0.0;
};

/// Sufficient regularity condition |C(t)^T v| >= c3 |v| with c3 > 0.
inline A5Check check_A5(const MatrixPath &C, double tol_sv = 1e-10) {
  double c3 = std::numeric_limits<double>::infinity();
  const int nodes = C.is_constant() ? 1 : C.grid().n_nodes();
  for (int i = 0; i < nodes; ++i) {
    const MatrixXd Ct = C.at(i).transpose(); // k x n acting on R^n
    double smin = 0.0;
    if (Ct.rows() >= Ct.cols()) {
      Eigen::JacobiSVD<MatrixXd> svd(Ct);
      smin = svd.singularValues().minCoeff();
    }
    c3 = std::min(c3, smin);
  }
  return {c3 > tol_sv, c3};
}

} // namespace ocstab
