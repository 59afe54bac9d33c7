/// @file
/// Uniform time grid on [0,1], nodal function samples, and the trapezoidal
/// quadrature, norms and pairings built on them.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ocstab/errors.hpp"

namespace ocstab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Uniform grid t_i = i/N, i = 0..N.
class TimeGrid {
public:
  explicit TimeGrid(int n_steps) : n_steps_(n_steps) {
    if (n_steps < 2)
      throw ValidationError("grid_steps", "need at least 2 steps, got " +
                                              std::to_string(n_steps));
  }

  int n_steps() const { return n_steps_; }
  int n_nodes() const { return n_steps_ + 1; }
  double h() const { return 1.0 / n_steps_; }
  double t(int i) const { return static_cast<double>(i) / n_steps_; }

  /// Trapezoid weight of node i.
  double weight(int i) const {
    return (i == 0 || i == n_steps_) ? 0.5 * h() : h();
  }

  bool operator==(const TimeGrid &) const = default;

private:
  int n_steps_;
};

/// Vector-valued function sampled at the grid nodes. Column i holds the
/// value at t_i. Immutable once built.
class GridFn {
public:
  GridFn(TimeGrid grid, MatrixXd values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.cols() != grid_.n_nodes())
      throw DimensionError("GridFn: expected " +
                           std::to_string(grid_.n_nodes()) + " samples, got " +
                           std::to_string(values_.cols()));
    if (values_.rows() < 1)
      throw DimensionError("GridFn: dimension must be positive");
    if (!values_.allFinite())
      throw ValidationError("GridFn", "non-finite sample");
  }

  static GridFn zeros(TimeGrid grid, int dim) {
    return GridFn(grid, MatrixXd::Zero(dim, grid.n_nodes()));
  }

  static GridFn constant(TimeGrid grid, const VectorXd &value) {
    return GridFn(grid, value.replicate(1, grid.n_nodes()));
  }

  /// Samples f(t) -> R^dim at every node.
  static GridFn sample(TimeGrid grid, int dim,
                       const std::function<VectorXd(double)> &f) {
    MatrixXd v(dim, grid.n_nodes());
    for (int i = 0; i < grid.n_nodes(); ++i)
      v.col(i) = f(grid.t(i));
    return GridFn(grid, std::move(v));
  }

  /// Scalar shorthand for dim = 1.
  static GridFn sample_scalar(TimeGrid grid,
                              const std::function<double(double)> &f) {
    MatrixXd v(1, grid.n_nodes());
    for (int i = 0; i < grid.n_nodes(); ++i)
      v(0, i) = f(grid.t(i));
    return GridFn(grid, std::move(v));
  }

  const TimeGrid &grid() const { return grid_; }
  int dim() const { return static_cast<int>(values_.rows()); }
  int n_nodes() const { return grid_.n_nodes(); }
  const MatrixXd &values() const { return values_; }
  auto at(int i) const { return values_.col(i); }
  double operator()(int component, int node) const {
    return values_(component, node);
  }

  GridFn operator+(const GridFn &o) const {
    require_same(o);
    return GridFn(grid_, values_ + o.values_);
  }
  GridFn operator-(const GridFn &o) const {
    require_same(o);
    return GridFn(grid_, values_ - o.values_);
  }
  GridFn operator*(double s) const { return GridFn(grid_, values_ * s); }
  friend GridFn operator*(double s, const GridFn &f) { return f * s; }

  void require_same(const GridFn &o) const {
    if (!(grid_ == o.grid_) || dim() != o.dim())
      throw DimensionError("GridFn operands differ in grid or dimension");
  }

private:
  TimeGrid grid_;
  MatrixXd values_;
};

/// F(t_0) = 0, F(t_{i+1}) = F(t_i) + (h/2)(f(t_i) + f(t_{i+1})).
inline GridFn cumulative_integral(const GridFn &f) {
  const auto &v = f.values();
  const double h = f.grid().h();
  MatrixXd out(v.rows(), v.cols());
  out.col(0).setZero();
  for (int i = 0; i + 1 < v.cols(); ++i)
    out.col(i + 1) = out.col(i) + 0.5 * h * (v.col(i) + v.col(i + 1));
  return GridFn(f.grid(), std::move(out));
}

/// Discrete realization of t -> \int_t^1 f: the transpose of
/// cumulative_integral under `pairing`, i.e.
///   pairing(cumulative_integral(f), g) == pairing(f, tail_integral(g))
/// holds to roundoff. At interior nodes this is the trapezoidal tail sum;
/// the two end nodes carry a half-cell correction of size (h/2) f.
inline GridFn tail_integral(const GridFn &f) {
  const auto &v = f.values();
  const TimeGrid &g = f.grid();
  const int last = g.n_steps();
  MatrixXd out(v.rows(), v.cols());
  VectorXd suffix = VectorXd::Zero(v.rows()); // sum_{i>j} w_i f_i
  for (int j = last; j >= 0; --j) {
    const double kappa = (j == 0) ? 0.0 : (j == last ? 1.0 : 0.5);
    out.col(j) = suffix + kappa * g.weight(j) * v.col(j);
    suffix += g.weight(j) * v.col(j);
  }
  return GridFn(g, std::move(out));
}

/// Trapezoidal \int_0^1 f.
inline VectorXd integral(const GridFn &f) {
  VectorXd acc = VectorXd::Zero(f.dim());
  for (int i = 0; i < f.n_nodes(); ++i)
    acc += f.grid().weight(i) * f.at(i);
  return acc;
}

/// Trapezoidal \int_0^1 <f(t), g(t)> dt.
inline double pairing(const GridFn &f, const GridFn &g) {
  f.require_same(g);
  double acc = 0.0;
  for (int i = 0; i < f.n_nodes(); ++i)
    acc += f.grid().weight(i) * f.at(i).dot(g.at(i));
  return acc;
}

/// (\int_0^1 |f(t)|^p dt)^{1/p} with the Euclidean norm pointwise.
inline double lp_norm(const GridFn &f, double p = 2.0) {
  if (!(p >= 1.0))
    throw std::invalid_argument("lp_norm: exponent must be >= 1");
  double acc = 0.0;
  for (int i = 0; i < f.n_nodes(); ++i) {
    const double r = f.at(i).norm();
    acc += f.grid().weight(i) * (p == 2.0 ? r * r : std::pow(r, p));
  }
  return p == 2.0 ? std::sqrt(acc) : std::pow(acc, 1.0 / p);
}

/// Largest nodal deviation max_i |f(t_i) - g(t_i)|_inf.
inline double sup_distance(const GridFn &f, const GridFn &g) {
  f.require_same(g);
  return (f.values() - g.values()).cwiseAbs().maxCoeff();
}

/// Absolutely continuous path with its derivative channel. The two channels
/// are trapezoid-compatible: x(t_{i+1}) - x(t_i) = (h/2)(xdot_i + xdot_{i+1}).
class Trajectory {
public:
  /// Checks compatibility of an explicitly supplied pair.
  Trajectory(GridFn state, GridFn derivative)
      : state_(std::move(state)), derivative_(std::move(derivative)) {
    state_.require_same(derivative_);
    const double h = state_.grid().h();
    const auto &x = state_.values();
    const auto &dx = derivative_.values();
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    for (int i = 0; i + 1 < x.cols(); ++i) {
      const double gap =
          (x.col(i + 1) - x.col(i) - 0.5 * h * (dx.col(i) + dx.col(i + 1)))
              .cwiseAbs()
              .maxCoeff();
      if (gap > 1e-12 * scale)
        throw ValidationError("Trajectory", "state and derivative are not "
                                            "trapezoid-compatible at node " +
                                                std::to_string(i + 1));
    }
  }

  /// x = x0 + cumulative_integral(derivative); compatible by construction.
  static Trajectory from_derivative(const VectorXd &x0, GridFn derivative) {
    if (x0.size() != derivative.dim())
      throw DimensionError("Trajectory: initial value dimension mismatch");
    MatrixXd x = cumulative_integral(derivative).values();
    x.colwise() += x0;
    return Trajectory(Unchecked{}, GridFn(derivative.grid(), std::move(x)),
                      std::move(derivative));
  }

  const GridFn &state() const { return state_; }
  const GridFn &derivative() const { return derivative_; }
  const TimeGrid &grid() const { return state_.grid(); }
  int dim() const { return state_.dim(); }
  VectorXd initial() const { return state_.at(0); }
  VectorXd terminal() const { return state_.at(grid().n_steps()); }

private:
  struct Unchecked {};
  Trajectory(Unchecked, GridFn state, GridFn derivative)
      : state_(std::move(state)), derivative_(std::move(derivative)) {}

  GridFn state_;
  GridFn derivative_;
};

/// |x(0)| + ||xdot||_p.
inline double sobolev_norm(const Trajectory &x, double p = 2.0) {
  return x.initial().norm() + lp_norm(x.derivative(), p);
}

/// CSV with header "t,v1,...,vd", one row per node, "%.17g" numbers.
inline void write_csv(std::ostream &os, const GridFn &f) {
  os << "t";
  for (int c = 0; c < f.dim(); ++c)
    os << ",v" << (c + 1);
  os << "\n";
  char buf[32];
  for (int i = 0; i < f.n_nodes(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", f.grid().t(i));
    os << buf;
    for (int c = 0; c < f.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", f(c, i));
      os << ',' << buf;
    }
    os << "\n";
  }
}

} // namespace ocstab
