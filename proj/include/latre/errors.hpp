#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latre {

// Base for all library errors. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed data, config, or violated precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

// Denominator of a ratio estimator at or below the configured floor.
class DegenerateDenominator : public Error {
 public:
  DegenerateDenominator(const std::string& what, double value)
      : Error(what), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class EmptyRegimeCell : public Error {
 public:
  using Error::Error;
};

class SingleClassError : public InputError {
 public:
  using InputError::InputError;
};

// Logistic optimizer diverged (perfect or quasi-perfect separation).
class SeparationError : public Error {
 public:
  SeparationError(const std::string& what, std::size_t period = 0)
      : Error(what), period_(period) {}
  std::size_t period() const noexcept { return period_; }

 private:
  std::size_t period_;
};

}  // namespace latre
