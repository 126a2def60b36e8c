#pragma once

#include <stdexcept>
#include <string>

namespace fracid {

// Two failure families, mirrored by the CLI exit codes:
//   ConfigError  -> exit 1 (bad flags, bad config fields, inconsistent shapes)
//   NumericError -> exit 2 (runtime numerical failures)
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Model fields violate an invariant (nonpositive eigenvalue, decreasing
// explicit list, alpha out of range, ...).
struct ModelValidationError : ConfigError {
  using ConfigError::ConfigError;
};

// Cross-object shape mismatch: grids, mode counts, or seeds that must agree.
struct ShapeError : ConfigError {
  using ConfigError::ConfigError;
};

// Dense storage request above the configured cap.
struct CapacityError : ConfigError {
  using ConfigError::ConfigError;
};

struct NumericError : Error {
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (s <= 0, u < 0).
struct DomainError : NumericError {
  using NumericError::NumericError;
};

// Mode or step index outside the stored range.
struct IndexError : NumericError {
  using NumericError::NumericError;
};

// Unsupported argument value (e.g. derivative order without a frozen bound).
struct ArgumentError : NumericError {
  using NumericError::NumericError;
};

// Optimizer could not produce a usable iterate (non-finite cost, empty scan).
struct OptimizationError : NumericError {
  using NumericError::NumericError;
};

// Ensemble reductions with nothing to reduce.
struct EmptyEnsembleError : NumericError {
  using NumericError::NumericError;
};

// Estimation routines fed degenerate data (e.g. zero increments in a
// log-log regression).
struct EstimationError : NumericError {
  using NumericError::NumericError;
};

}  // namespace fracid
