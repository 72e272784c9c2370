#pragma once

#include <stdexcept>
#include <string>

namespace isb {

// Precondition violated by the caller (bad argument, invalid value object).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent run configuration.
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A mode sum could not reach its tail tolerance below the mode cap.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, double achieved_tail, long required_mode)
      : std::runtime_error(what), achieved_tail_(achieved_tail), required_mode_(required_mode) {}
  double achieved_tail() const noexcept { return achieved_tail_; }
  long required_mode() const noexcept { return required_mode_; }

 private:
  double achieved_tail_;
  long required_mode_;
};

// Problem too large for the dense solvers (Hilbert-space cap and similar).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature or optimizer failure, non-finite intermediate results.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace isb
