#pragma once

#include <memory>
#include <string>

#include "fmtpff/learning.hpp"
#include "fmtpff/linear_steering.hpp"

namespace fmtpff {

/// Steering primitives used by the planners. Implementations are immutable
/// after construction and safe to share between concurrent plans.
class SteeringBackend {
 public:
  virtual ~SteeringBackend() = default;

  virtual std::string name() const = 0;
  virtual const SystemModel& system() const = 0;

  // Cost-to-go estimate from x to the position goal; +inf when unavailable.
  virtual double segcost(const StateVec& x, const PartialState& goal) const = 0;
  virtual SteeringResult steer(const StateVec& x, const PartialState& goal) const = 0;

  // Exact full-state steering (needed for rewiring and full-state FMT*).
  virtual bool exact() const { return false; }
  virtual double segcost_full(const StateVec& x_a, const StateVec& x_b) const;
  virtual SteeringResult steer_full(const StateVec& x_a, const StateVec& x_b) const;

  // Largest neighbor radius the backend can serve.
  virtual double max_radius() const { return std::numeric_limits<double>::infinity(); }
};

/// Closed-form steering for a linear system.
class LinearBackend final : public SteeringBackend {
 public:
  explicit LinearBackend(LinearSystem sys);
  static std::shared_ptr<LinearBackend> double_integrator();

  std::string name() const override { return "linear"; }
  const SystemModel& system() const override { return model_; }
  double segcost(const StateVec& x, const PartialState& goal) const override;
  SteeringResult steer(const StateVec& x, const PartialState& goal) const override;
  bool exact() const override { return true; }
  double segcost_full(const StateVec& x_a, const StateVec& x_b) const override;
  SteeringResult steer_full(const StateVec& x_a, const StateVec& x_b) const override;

  const LinearSystem& linear_system() const { return sys_; }

 private:
  LinearSystem sys_;
  SystemModel model_;
};

/// Network controller rollouts plus the cost-to-go network. Queries whose
/// start, shifted relative to the goal, leaves the training box are refused
/// (cost +inf, failed steering).
class LearnedBackend final : public SteeringBackend {
 public:
  LearnedBackend(SystemModel system, Mlp controller, Mlp cost, RolloutOptions options = {});

  std::string name() const override { return "learned"; }
  const SystemModel& system() const override { return system_; }
  double segcost(const StateVec& x, const PartialState& goal) const override;
  SteeringResult steer(const StateVec& x, const PartialState& goal) const override;
  // Training-box half-width less the success radius.
  double max_radius() const override;

  const StateBox& guard() const { return guard_; }

 private:
  SystemModel system_;
  Mlp controller_;
  Mlp cost_;
  RolloutOptions options_;
  StateBox guard_;
};

}  // namespace fmtpff
