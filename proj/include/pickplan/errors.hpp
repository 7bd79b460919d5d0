#pragma once

#include <stdexcept>
#include <string>

namespace pickplan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scene generation could not satisfy the placement constraints within the
// attempt cap.
struct SamplingExhausted : Error {
  using Error::Error;
};

// No base pose on the grid can reach the object.
struct EmptyCandidateSet : Error {
  using Error::Error;
};

// grasp_time queried for a pose outside the reachable annulus.
struct InfeasibleGrasp : Error {
  using Error::Error;
};

// Plan references unknown object ids or repeats an object.
struct InvalidPlan : Error {
  using Error::Error;
};

// Instance exceeds a solver's complexity guard.
struct InstanceTooLarge : Error {
  using Error::Error;
};

// Tensor operation with incompatible shapes.
struct ShapeMismatch : Error {
  using Error::Error;
};

// NaN/Inf produced by a tensor operation on finite inputs.
struct NumericalError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace pickplan
