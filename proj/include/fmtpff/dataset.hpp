#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "fmtpff/dynamics.hpp"

namespace fmtpff {

struct StateBox {
  StateVec lower = StateVec::Zero();
  StateVec upper = StateVec::Zero();

  bool contains(const StateVec& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
  // Training range of the kinematic car: |x|,|y| <= 4, heading free, |v| <= 2.
  static StateBox car_training();
  // Same positional range for the double integrator with |v| <= 2 per axis.
  static StateBox double_integrator_training();
};

/// Supervised data for the steering networks. Row i pairs a state with the
/// optimal control applied there; rows that start a solved trajectory also
/// carry its optimal cost-to-go.
struct Dataset {
  std::vector<StateVec> inputs;
  std::vector<ControlVec> control_targets;
  std::vector<std::optional<double>> cost_targets;

  std::size_t size() const { return inputs.size(); }
  void append(const StateVec& x, const ControlVec& u, std::optional<double> cost = std::nullopt) {
    inputs.push_back(x);
    control_targets.push_back(u);
    cost_targets.push_back(cost);
  }
  void validate() const;
};

// CSV with header x1..x4,u1,u2,cost_to_go; cost_to_go blank when absent.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);

}  // namespace fmtpff
