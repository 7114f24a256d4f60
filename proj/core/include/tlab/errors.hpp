#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tlab {

/// Raised when an argument breaks an operation's documented precondition
/// (shape mismatch, asymmetric input, invalid configuration value).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is structurally valid but numerically degenerate (rank deficient).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization met a non-positive pivot.
class SingularMatrix : public std::runtime_error {
 public:
  SingularMatrix(const std::string& what, std::size_t pivot)
      : std::runtime_error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// A model-class constraint (e.g. a head output cap) does not hold.
class ConstraintViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data-generating specification cannot be realized (e.g. norm cap too small).
class InfeasibleSpec : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tlab
