#pragma once

#include <stdexcept>
#include <string>

namespace ktt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: inconsistent shapes, unknown tags, malformed files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A requested dense object would exceed the configured entry cap.
class SizeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Base class for failures of a numerical method on valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Logarithm of an eigenvalue at (or numerically at) zero.
class SingularLogError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : NumericalError(what + " (last good time " + std::to_string(last_good_time) + ")"),
        last_good_time_(last_good_time) {}

  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

}  // namespace ktt
