#pragma once

#include "fmtpff/dynamics.hpp"

namespace fmtpff {

/// Outcome of one steering call. Steering may be inexact: final_state is the
/// state actually reached and endpoint_error its distance to the requested
/// boundary condition.
struct SteeringResult {
  Trajectory trajectory;
  StateVec final_state = StateVec::Zero();
  double cost = 0.0;
  double tf = 0.0;
  bool success = false;
  double endpoint_error = 0.0;
};

inline SteeringResult steering_failure(double endpoint_error = std::numeric_limits<double>::infinity()) {
  SteeringResult r;
  r.cost = std::numeric_limits<double>::infinity();
  r.endpoint_error = endpoint_error;
  return r;
}

}  // namespace fmtpff
