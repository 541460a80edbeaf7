#ifndef ROAMTOK_ERRORS_HPP
#define ROAMTOK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace roamtok {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fisher information fails the invertibility floor.
class SingularModel : public Error {
 public:
  using Error::Error;
};

/// Model/config data is malformed (sizes, non-SPD covariance, ...).
class InvalidModel : public Error {
 public:
  using Error::Error;
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

class SequenceExhausted : public Error {
 public:
  using Error::Error;
};

class UnsupportedProcess : public Error {
 public:
  using Error::Error;
};

/// A linear solve exceeded its residual tolerance.
class SolveFailed : public Error {
 public:
  using Error::Error;
};

class MissingTrace : public Error {
 public:
  using Error::Error;
};

/// The token left its holder along an edge absent from A(t).
class ChainViolation : public Error {
 public:
  using Error::Error;
};

/// Config parse/validation failure. Carries the offending key or line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A run produced NaN or Inf in a metric.
class NonFiniteMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace roamtok

#endif  // ROAMTOK_ERRORS_HPP
