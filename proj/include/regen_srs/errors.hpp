#ifndef REGEN_SRS_ERRORS_HPP
#define REGEN_SRS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace regen_srs {

/// Input violates a documented precondition or type invariant.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Two distributions (or a state and a map) live on different intervals.
class DomainMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// A map sends a grid point outside the grid, so exact propagation is impossible.
class GridClosureError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Exact enumeration would exceed its work budget or tail-mass tolerance.
class BudgetExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver stopped before reaching its tolerance.
class NonConvergence : public std::runtime_error {
public:
  NonConvergence(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what), residual_(last_residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

/// JSON spec document does not match the schema; `path()` points at the field.
class SpecError : public ValidationError {
public:
  SpecError(std::string path, const std::string& what)
      : ValidationError(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

}  // namespace regen_srs

#endif  // REGEN_SRS_ERRORS_HPP
