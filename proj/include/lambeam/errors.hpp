#pragma once

#include <stdexcept>
#include <string>

namespace lambeam {

/// Bad user-facing input: parameter domains, grid sizes, mismatched shapes.
/// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative solver ran out of budget. The CLI maps this to exit code 3.
class NonConvergenceError : public std::runtime_error {
 public:
  explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Violated internal invariant (e.g. an SPD factorization failed on a matrix
/// that is SPD by construction). Not reachable through valid inputs.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace lambeam
