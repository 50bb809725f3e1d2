#pragma once

#include <stdexcept>
#include <string>

namespace sapflow {

/// Invalid or inconsistent configuration (bad key, out-of-range value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable forcing data.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside the cell or stem integrators.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A gas bubble radius reached its floor; the model has no closure for total dissolution.
class BubbleCollapse : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace sapflow
