#pragma once

#include <stdexcept>
#include <string>

namespace csg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, violated mesh invariants, missing artifacts.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Solver non-convergence, degenerate configurations, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments supplied by a caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace csg
