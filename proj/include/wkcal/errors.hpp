#pragma once

#include <stdexcept>
#include <string>

namespace wkcal {

/// Base for all domain failures. Precondition violations use std::invalid_argument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The ODE state became non-finite.
class IntegrationError : public Error {
 public:
  explicit IntegrationError(double time)
      : Error("integration failure: non-finite pressure at t = " + std::to_string(time) + " s"),
        time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class SynchronizationError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Covariance factorization failed even at the largest jitter.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// Malformed or contract-violating observation data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Wraps a failure inside one stage of the calibration pipeline.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace wkcal
