#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hdivfwd {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  success = 0,
  usage = 2,
  validation = 3,
  numerical = 4,
};

/// Base class of all library errors. Each error carries the exit code the CLI
/// reports for it.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

/// Invalid input: bad parameters, malformed files, unknown labels.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::validation, what) {}
};

/// Requested geometry does not fit the grid.
class DimensionError : public ValidationError {
 public:
  explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

/// A source was placed outside the computational domain.
class PlacementError : public ValidationError {
 public:
  explicit PlacementError(const std::string& what) : ValidationError(what) {}
};

/// The labeled region contains no conducting cell.
class EmptyDomainError : public ValidationError {
 public:
  explicit EmptyDomainError(const std::string& what) : ValidationError(what) {}
};

/// An iterative method failed to converge or hit a numerically singular operator.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<double> history = {})
      : Error(ExitCode::numerical, what), history_(std::move(history)) {}
  /// Relative residual per iteration up to the failure point.
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace hdivfwd
