#pragma once

#include <stdexcept>
#include <string>

namespace fmtpff {

// Caller broke a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Forward simulation produced a non-finite state.
class IntegrationFailure : public std::runtime_error {
 public:
  explicit IntegrationFailure(const std::string& what) : std::runtime_error(what) {}
};

// Configuration that a component refuses to run with (e.g. rewiring with a
// steering backend that cannot steer exactly).
class UnsupportedConfiguration : public std::runtime_error {
 public:
  explicit UnsupportedConfiguration(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged (non-finite loss).
class TrainingFailure : public std::runtime_error {
 public:
  explicit TrainingFailure(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace fmtpff
