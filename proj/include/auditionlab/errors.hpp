#pragma once

#include <stdexcept>
#include <string>

namespace auditionlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, non-finite input, or a broken invariant on input data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Action magnitude exceeds the per-step limit, or leaves the world bounds.
class BoundViolation : public Error {
 public:
  using Error::Error;
};

/// Source closer than r_min to a microphone.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Every cell of a belief has zero weight. Caller should reset to uniform.
class DegenerateBelief : public Error {
 public:
  using Error::Error;
};

/// Singular innovation covariance and similar linear algebra failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Bayes update against an observation with zero probability under the belief.
class ImpossibleObservation : public Error {
 public:
  using Error::Error;
};

/// A policy returned an action index outside the action set.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Discrete model would exceed the configured size cap.
class TooLargeError : public Error {
 public:
  using Error::Error;
};

/// Scenario file could not be parsed or validated.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace auditionlab
