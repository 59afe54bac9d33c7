// Hand-rolled generators shared by the unit tests and the acceptance driver.
#pragma once

#include <cmath>
#include <random>
#include <string>

#include "ocstab/ocstab.hpp"

namespace ocstab::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng &rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline VectorXd random_vector(Rng &rng, int n, double scale = 1.0) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v(i) = scale * uniform(rng);
  return v;
}

inline MatrixXd random_matrix(Rng &rng, int r, int c, double scale = 1.0) {
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      m(i, j) = scale * uniform(rng);
  return m;
}

inline MatrixXd random_psd(Rng &rng, int n) {
  const MatrixXd g = random_matrix(rng, n, n);
  return g * g.transpose() / n;
}

/// Smooth random function: a few random harmonics per component.
inline GridFn random_smooth(Rng &rng, const TimeGrid &grid, int dim,
                            double scale = 1.0) {
  MatrixXd coef = random_matrix(rng, dim, 4, scale);
  return GridFn::sample(grid, dim, [&](double t) {
    VectorXd v(dim);
    for (int c = 0; c < dim; ++c)
      v(c) = coef(c, 0) + coef(c, 1) * t + coef(c, 2) * std::sin(3 * t) +
             coef(c, 3) * std::cos(5 * t);
    return v;
  });
}

/// Unstructured nodal noise.
inline GridFn random_nodal(Rng &rng, const TimeGrid &grid, int dim,
                           double scale = 1.0) {
  return GridFn(grid, random_matrix(rng, dim, grid.n_nodes(), scale));
}

inline Trajectory random_trajectory(Rng &rng, const TimeGrid &grid, int dim) {
  return Trajectory::from_derivative(random_vector(rng, dim),
                                     random_smooth(rng, grid, dim));
}

enum class SetKind { Unconstrained, Ball, Box };

inline ControlSet make_set(Rng &rng, SetKind kind, const TimeGrid &grid,
                           int m) {
  switch (kind) {
  case SetKind::Unconstrained:
    return ControlSet::unconstrained();
  case SetKind::Ball:
    return ControlSet::ball(uniform(rng, 0.5, 2.0));
  case SetKind::Box:
    break;
  }
  const VectorXd lo = -VectorXd::Ones(m) - random_vector(rng, m, 0.5).cwiseAbs();
  const VectorXd hi = VectorXd::Ones(m) + random_vector(rng, m, 0.5).cwiseAbs();
  return ControlSet::box(GridFn::constant(grid, lo), GridFn::constant(grid, hi));
}

/// Random convex quadratic data over constant random matrices.
inline OcProblem random_problem(Rng &rng, int steps, int n, int m, int k,
                                SetKind kind = SetKind::Ball) {
  const TimeGrid g(steps);
  CostSpec c = CostSpec::zero(n, m, k);
  c.Q = random_psd(rng, n);
  c.q = random_vector(rng, n);
  c.c0 = uniform(rng);
  c.Rx = random_psd(rng, n);
  c.Ru = random_psd(rng, m) + 0.1 * MatrixXd::Identity(m, m);
  c.Rtheta = random_psd(rng, k);
  c.rx = random_vector(rng, n);
  c.ru = random_vector(rng, m);
  c.rtheta = random_vector(rng, k);
  c.r0 = uniform(rng);
  return OcProblem(g,
                   {MatrixPath::constant(g, random_matrix(rng, n, n)),
                    MatrixPath::constant(g, random_matrix(rng, n, m)),
                    MatrixPath::constant(g, random_matrix(rng, n, k))},
                   std::move(c), make_set(rng, kind, g, m));
}

inline OcProblem random_problem(Rng &rng, int steps, SetKind kind) {
  return random_problem(rng, steps, uniform_int(rng, 1, 3),
                        uniform_int(rng, 1, 3), uniform_int(rng, 1, 3), kind);
}

inline Parameter random_parameter(Rng &rng, const OcProblem &p) {
  return {random_vector(rng, p.n()), random_smooth(rng, p.grid(), p.k(), 0.5)};
}

/// Composed cost u -> J(x(u), u, w).
inline double composed_cost(const OcProblem &p, const GridFn &u,
                            const Parameter &w) {
  return eval_cost(p, integrate_state(p, u, w), u, w);
}

inline Eigen::Vector2d vec2(double a, double b) { return {a, b}; }

/// Point drawn uniformly from the region 12 a1^2 + 12 a1 a2 + 4 a2^2 <= r2.
inline Eigen::Vector2d random_in_ellipse(Rng &rng, double r2 = 0.9) {
  for (;;) {
    Eigen::Vector2d a(uniform(rng, -0.6, 0.6), uniform(rng, -1.0, 1.0));
    const double q = 12 * a(0) * a(0) + 12 * a(0) * a(1) + 4 * a(1) * a(1);
    if (q <= r2)
      return a;
  }
}

inline std::string source_path(const std::string &rel) {
  return std::string(OCSTAB_SOURCE_DIR) + "/" + rel;
}

} // namespace ocstab::testing
