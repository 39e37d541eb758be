#include "fmtpff/backends.hpp"

#include <algorithm>

#include "fmtpff/errors.hpp"

namespace fmtpff {

double SteeringBackend::segcost_full(const StateVec&, const StateVec&) const {
  throw UnsupportedConfiguration(name() + " backend cannot steer to a full state");
}

SteeringResult SteeringBackend::steer_full(const StateVec&, const StateVec&) const {
  throw UnsupportedConfiguration(name() + " backend cannot steer to a full state");
}

LinearBackend::LinearBackend(LinearSystem sys) : sys_(std::move(sys)), model_(SystemModel::double_integrator()) {
  model_.cost_weights = sys_.r();
}

std::shared_ptr<LinearBackend> LinearBackend::double_integrator() {
  return std::make_shared<LinearBackend>(LinearSystem::double_integrator());
}

double LinearBackend::segcost(const StateVec& x, const PartialState& goal) const {
  return segcost_linear(sys_, x, goal);
}

SteeringResult LinearBackend::steer(const StateVec& x, const PartialState& goal) const {
  return steer_pff(sys_, x, goal);
}

double LinearBackend::segcost_full(const StateVec& x_a, const StateVec& x_b) const {
  return segcost_full_linear(sys_, x_a, x_b);
}

SteeringResult LinearBackend::steer_full(const StateVec& x_a, const StateVec& x_b) const {
  return fmtpff::steer_full(sys_, x_a, x_b);
}

LearnedBackend::LearnedBackend(SystemModel system, Mlp controller, Mlp cost, RolloutOptions options)
    : system_(std::move(system)),
      controller_(std::move(controller)),
      cost_(std::move(cost)),
      options_(std::move(options)),
      guard_(options_.guard.value_or(training_box(system_.kind))) {
  system_.validate();
  controller_.validate();
  cost_.validate();
  require(controller_.input_dim() == kStateDim && controller_.output_dim() == kControlDim,
          "learned backend: controller must map states to controls");
  require(cost_.input_dim() == kStateDim && cost_.output_dim() == 1, "learned backend: cost head must be scalar");
  options_.guard = guard_;
}

double LearnedBackend::segcost(const StateVec& x, const PartialState& goal) const {
  StateVec rel = normalize_state(system_, x);
  rel.head<kPartialDim>() -= goal;
  if (!guard_.contains(rel)) return std::numeric_limits<double>::infinity();
  return predict_cost(cost_, rel);
}

SteeringResult LearnedBackend::steer(const StateVec& x, const PartialState& goal) const {
  return rollout_nn_steer(system_, controller_, x, goal, options_);
}

double LearnedBackend::max_radius() const {
  const double half = 0.5 * std::min(guard_.upper[0] - guard_.lower[0], guard_.upper[1] - guard_.lower[1]);
  return half - options_.success_radius;
}

}  // namespace fmtpff
