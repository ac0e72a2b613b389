#pragma once

#include <stdexcept>
#include <string>

namespace mvcar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter vector that maps to an invalid model (non-PD Lambda^-1,
/// singular M, alpha at the admissible boundary). Inference treats it as a
/// point with log-density -inf.
class InvalidHyperparameters : public Error {
 public:
  using Error::Error;
};

class ConstraintDegeneracy : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class OptimizationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace mvcar
