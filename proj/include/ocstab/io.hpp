/// @file
/// Problem files (JSON), result documents (JSON) and function exports (CSV).
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ocstab/grid.hpp"
#include "ocstab/problem.hpp"
#include "ocstab/solver.hpp"
#include "ocstab/subdiff.hpp"

namespace ocstab {

using nlohmann::json;

/// A problem file: the problem itself and the nominal parameter.
struct ProblemFile {
  OcProblem problem;
  Parameter parameter;
};

namespace detail {

inline const json &require(const json &j, const std::string &key,
                           const std::string &path) {
  if (!j.is_object() || !j.contains(key))
    throw ValidationError(path.empty() ? key : path + "." + key,
                          "missing field");
  return j.at(key);
}

inline double number(const json &j, const std::string &field) {
  if (!j.is_number())
    throw ValidationError(field, "expected a number");
  return j.get<double>();
}

inline int positive_int(const json &j, const std::string &field) {
  if (!j.is_number_integer() || j.get<long long>() < 1)
    throw ValidationError(field, "expected a positive integer");
  return j.get<int>();
}

inline VectorXd vector_of(const json &j, int len, const std::string &field) {
  if (!j.is_array() || static_cast<int>(j.size()) != len)
    throw ValidationError(field, "expected an array of " +
                                     std::to_string(len) + " numbers");
  VectorXd v(len);
  for (int i = 0; i < len; ++i)
    v(i) = number(j[i], field + "[" + std::to_string(i) + "]");
  return v;
}

/// Row-major matrix, either nested ([[..],[..]]) or flat.
inline MatrixXd matrix_of(const json &j, int rows, int cols,
                          const std::string &field) {
  MatrixXd m(rows, cols);
  if (!j.is_array())
    throw ValidationError(field, "expected a row-major array");
  if (rows * cols == 0) {
    if (!j.empty())
      throw ValidationError(field, "expected an empty matrix");
    return m;
  }
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != rows)
      throw ValidationError(field, "expected " + std::to_string(rows) +
                                       " rows");
    for (int r = 0; r < rows; ++r)
      m.row(r) =
          vector_of(j[r], cols, field + "[" + std::to_string(r) + "]")
              .transpose();
    return m;
  }
  if (static_cast<int>(j.size()) != rows * cols)
    throw ValidationError(field, "expected " + std::to_string(rows) + "x" +
                                     std::to_string(cols) +
                                     " entries (row-major)");
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = number(j[r * cols + c], field);
  return m;
}

inline MatrixPath matrix_path_of(const json &j, const TimeGrid &grid, int rows,
                                 int cols, const std::string &field) {
  if (j.is_object() && j.contains("constant"))
    return MatrixPath::constant(
        grid, matrix_of(j.at("constant"), rows, cols, field + ".constant"));
  if (j.is_object() && j.contains("samples")) {
    const json &s = j.at("samples");
    if (!s.is_array() || static_cast<int>(s.size()) != grid.n_nodes())
      throw ValidationError(field + ".samples",
                            "expected " + std::to_string(grid.n_nodes()) +
                                " matrices (one per node)");
    std::vector<MatrixXd> ms;
    for (int i = 0; i < grid.n_nodes(); ++i)
      ms.push_back(matrix_of(s[i], rows, cols,
                             field + ".samples[" + std::to_string(i) + "]"));
    return MatrixPath::samples(grid, std::move(ms));
  }
  throw ValidationError(field, "expected {\"constant\": ...} or "
                               "{\"samples\": [...]}");
}

/// Constant vector or one vector per node.
inline GridFn grid_fn_of(const json &j, const TimeGrid &grid, int dim,
                         const std::string &field) {
  if (j.is_array() && static_cast<int>(j.size()) == grid.n_nodes() &&
      !j.empty() && j[0].is_array()) {
    MatrixXd v(dim, grid.n_nodes());
    for (int i = 0; i < grid.n_nodes(); ++i)
      v.col(i) = vector_of(j[i], dim, field + "[" + std::to_string(i) + "]");
    return GridFn(grid, std::move(v));
  }
  return GridFn::constant(grid, vector_of(j, dim, field));
}

inline MatrixXd cost_matrix(const json &cost, const char *key, int dim) {
  if (!cost.contains(key))
    return MatrixXd::Zero(dim, dim);
  return matrix_of(cost.at(key), dim, dim, std::string("cost.") + key);
}

inline VectorXd cost_vector(const json &cost, const char *key, int dim) {
  if (!cost.contains(key))
    return VectorXd::Zero(dim);
  return vector_of(cost.at(key), dim, std::string("cost.") + key);
}

} // namespace detail

/// Parses a problem document. `grid_override` replaces grid_steps.
inline ProblemFile parse_problem(const json &doc,
                                 std::optional<int> grid_override = {}) {
  using namespace detail;
  if (!doc.is_object())
    throw ValidationError("<root>", "expected a JSON object");
  const int n = positive_int(require(doc, "n", ""), "n");
  const int m = positive_int(require(doc, "m", ""), "m");
  const int k = positive_int(require(doc, "k", ""), "k");
  const int steps = grid_override
                        ? *grid_override
                        : positive_int(require(doc, "grid_steps", ""),
                                       "grid_steps");
  if (steps < 2)
    throw ValidationError("grid_steps", "need at least 2 steps");
  const TimeGrid grid(steps);

  SystemMatrices mats{matrix_path_of(require(doc, "A", ""), grid, n, n, "A"),
                      matrix_path_of(require(doc, "B", ""), grid, n, m, "B"),
                      matrix_path_of(require(doc, "C", ""), grid, n, k, "C")};

  const json empty = json::object();
  const json &c = doc.contains("cost") ? doc.at("cost") : empty;
  if (!c.is_object())
    throw ValidationError("cost", "expected an object");
  CostSpec cost;
  cost.Q = cost_matrix(c, "Q", n);
  cost.q = cost_vector(c, "q", n);
  cost.c0 = c.contains("c0") ? number(c.at("c0"), "cost.c0") : 0.0;
  cost.Rx = cost_matrix(c, "Rx", n);
  cost.Ru = cost_matrix(c, "Ru", m);
  cost.Rtheta = cost_matrix(c, "Rtheta", k);
  cost.rx = cost_vector(c, "rx", n);
  cost.ru = cost_vector(c, "ru", m);
  cost.rtheta = cost_vector(c, "rtheta", k);
  cost.r0 = c.contains("r0") ? number(c.at("r0"), "cost.r0") : 0.0;

  const json &cs = require(doc, "control_set", "");
  const json &kind_j = require(cs, "kind", "control_set");
  if (!kind_j.is_string())
    throw ValidationError("control_set.kind", "expected a string");
  const std::string kind = kind_j.get<std::string>();
  std::optional<ControlSet> set;
  if (kind == "unconstrained") {
    set = ControlSet::unconstrained();
  } else if (kind == "l2ball") {
    set = ControlSet::ball(
        number(require(cs, "radius", "control_set"), "control_set.radius"));
  } else if (kind == "box") {
    set = ControlSet::box(
        grid_fn_of(require(cs, "lower", "control_set"), grid, m,
                   "control_set.lower"),
        grid_fn_of(require(cs, "upper", "control_set"), grid, m,
                   "control_set.upper"));
  } else {
    throw ValidationError("control_set.kind",
                          "expected one of unconstrained, l2ball, box; got \"" +
                              kind + "\"");
  }

  OcProblem prob(grid, std::move(mats), std::move(cost), std::move(*set));

  const json &par = require(doc, "parameter", "");
  VectorXd alpha =
      vector_of(require(par, "alpha", "parameter"), n, "parameter.alpha");
  GridFn theta = GridFn::zeros(grid, k);
  if (par.contains("theta")) {
    const json &th = par.at("theta");
    if (th.is_string()) {
      if (th.get<std::string>() != "zero")
        throw ValidationError("parameter.theta",
                              "expected \"zero\" or samples");
    } else {
      theta = grid_fn_of(th, grid, k, "parameter.theta");
    }
  }
  return {std::move(prob), Parameter{std::move(alpha), std::move(theta)}};
}

inline ProblemFile load_problem(const std::filesystem::path &path,
                                std::optional<int> grid_override = {}) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ValidationError("<json>", e.what());
  }
  return parse_problem(doc, grid_override);
}

inline json to_json(const VectorXd &v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i)
    a.push_back(v(i));
  return a;
}

inline json to_json(const MatrixXd &m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r)
    rows.push_back(to_json(VectorXd(m.row(r).transpose())));
  return rows;
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path &path,
                              const std::string &content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline void write_csv_file(const std::filesystem::path &path, const GridFn &f) {
  std::ostringstream os;
  write_csv(os, f);
  write_file_atomic(path, os.str());
}

inline json solve_result_json(const SolveResult &r) {
  json j;
  j["value"] = r.value;
  j["iterations"] = r.iterations;
  j["optimality_residual"] = r.optimality_residual;
  j["converged"] = r.converged;
  j["boundary_flag"] =
      r.boundary_flag ? json(to_string(*r.boundary_flag)) : json(nullptr);
  j["files"] = {{"xbar", "xbar.csv"}, {"ubar", "ubar.csv"}};
  return j;
}

inline json subdiff_result_json(const SubdiffResult &r) {
  json j;
  j["status"] = to_string(r.status);
  j["alpha_star"] = to_json(r.alpha_star);
  j["lambda"] = r.certificate.lambda ? json(*r.certificate.lambda)
                                     : json(nullptr);
  j["cone_branch"] = to_string(r.certificate.branch);
  j["membership_residual"] = r.certificate.residual;
  j["tol_member"] = r.tol_member;
  j["borderline"] = r.borderline;
  j["assumptions_verified"] = r.assumptions_verified;
  j["c3"] = r.c3;
  j["files"] = {{"theta_star", "theta_star.csv"},
                {"u_star", "u_star.csv"},
                {"adjoint", "adjoint.csv"}};
  return j;
}

inline json singular_result_json(const SingularSubdiffResult &r) {
  json j;
  j["status"] = to_string(r.status);
  j["sigma_min"] = r.sigma_min;
  j["sigma_min_phi1"] = r.sigma_min_phi1;
  json basis = json::array();
  for (std::size_t i = 0; i < r.basis.size(); ++i)
    basis.push_back({{"alpha_star", to_json(r.basis[i].alpha_star)},
                     {"theta_star",
                      "ssubdiff_theta_star_" + std::to_string(i) + ".csv"}});
  j["basis"] = basis;
  return j;
}

} // namespace ocstab
