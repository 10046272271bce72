#pragma once

#include <stdexcept>
#include <string>

namespace defectlab {

// Argument outside the mathematical domain of an operation (t <= 0, k == 0, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Input violates a structural constraint (asymmetric or traceful tensor, ...).
class ConstraintError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation's precondition (missing derivatives, grid mismatch, ...).
class PreconditionError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Non-finite state or a breakdown inside a numerical kernel.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Nonlinear solve did not converge; carries the last residual max-norm.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

// Malformed command-line or configuration input.
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// File system failure or malformed document.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace defectlab
