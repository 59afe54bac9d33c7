/// @file
/// Exception hierarchy shared by all ocstab modules.
#pragma once

#include <stdexcept>
#include <string>

namespace ocstab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operands live on different grids or have incompatible dimensions.
struct DimensionError : Error {
  using Error::Error;
};

/// Problem data violates an invariant. `field` names the offending entry
/// using the dotted path of the problem file (e.g. "cost.Q").
struct ValidationError : Error {
  ValidationError(std::string field_, const std::string &what)
      : Error(field_ + ": " + what), field(std::move(field_)) {}
  std::string field;
};

/// A control is outside the admissible set by more than the tolerance.
struct FeasibilityError : Error {
  using Error::Error;
};

/// The implicit trapezoidal step matrix could not be inverted.
struct StepSingular : Error {
  explicit StepSingular(int node_)
      : Error("singular step matrix at node " + std::to_string(node_)),
        node(node_) {}
  int node;
};

/// The supplied pair fails the optimality certificate.
struct NotOptimal : Error {
  using Error::Error;
};

/// Closed forms requested outside their region of validity.
struct OutsideRegion : Error {
  using Error::Error;
};

} // namespace ocstab
