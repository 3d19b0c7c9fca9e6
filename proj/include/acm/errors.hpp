#pragma once

#include <stdexcept>
#include <string>

namespace acm {

// Root of every error raised by the library. Callers that only care about
// "something went wrong in the model" can catch this one type.
class AcmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, scenario definitions or config files.
class ConfigError : public AcmError {
 public:
  ConfigError(std::string field, const std::string& message)
      : AcmError(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  explicit ConfigError(const std::string& message) : AcmError(message) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// An argument outside the documented domain (arc length beyond the arm, ...).
class DomainError : public AcmError {
 public:
  using AcmError::AcmError;
};

// Euler-rate map evaluated too close to gimbal lock.
class SingularMapError : public AcmError {
 public:
  using AcmError::AcmError;
};

// Mass matrix not positive definite or too badly conditioned to solve.
class NearSingularDynamicsError : public AcmError {
 public:
  NearSingularDynamicsError(const std::string& message, double condition)
      : AcmError(message), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// Non-finite state or derivative during time stepping.
class IntegrationBlowupError : public AcmError {
 public:
  IntegrationBlowupError(const std::string& message, double time, long step)
      : AcmError(message), time_(time), step_(step) {}

  double time() const noexcept { return time_; }
  long step() const noexcept { return step_; }

 private:
  double time_;
  long step_;
};

// A target feature left the field of view or moved behind the camera.
class FeatureLossError : public AcmError {
 public:
  FeatureLossError(const std::string& message, double time) : AcmError(message), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

// Mismatched vector sizes or misaligned traces.
class DimensionError : public AcmError {
 public:
  using AcmError::AcmError;
};

}  // namespace acm
