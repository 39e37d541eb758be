#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fmtpff/dynamics.hpp"
#include "fmtpff/steering.hpp"

namespace fmtpff {

using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMatrix = Eigen::Matrix<double, kStateDim, kControlDim>;
using Selector = Eigen::Matrix<double, kPartialDim, kStateDim>;

struct LinearSteeringOptions {
  double t_min = 0.05;
  double t_max = 20.0;
  int grid_points = 60;
  double refine_tolerance = 1e-4;
  double dt = 0.01;
  double endpoint_tolerance = 1e-4;
};

/// x' = Ax + Bu with running cost 1 + u'Ru.
///
/// Construction checks Kalman controllability and R > 0, then tabulates the
/// Gramian and the state transition matrix on the coarse t_f grid so that
/// repeated steering queries only pay for the refinement step. Immutable
/// afterwards; safe to share across threads.
class LinearSystem {
 public:
  LinearSystem(const StateMatrix& a, const InputMatrix& b, const CostWeights& r,
               LinearSteeringOptions options = {});

  static LinearSystem double_integrator(const CostWeights& r = CostWeights::Identity(),
                                        LinearSteeringOptions options = {});

  const StateMatrix& a() const { return a_; }
  const InputMatrix& b() const { return b_; }
  const CostWeights& r() const { return r_; }
  const Selector& selector() const { return selector_; }
  const LinearSteeringOptions& options() const { return options_; }

  StateMatrix transition(double t) const;
  StateMatrix gramian(double t) const;

  struct GridEntry {
    double t;
    StateMatrix transition;
    StateMatrix gramian;
  };
  const std::vector<GridEntry>& grid() const { return grid_; }
  const SystemModel& cost_model() const { return cost_model_; }

 private:
  StateMatrix a_;
  InputMatrix b_;
  CostWeights r_;
  CostWeights r_inv_;
  Selector selector_;
  LinearSteeringOptions options_;
  SystemModel cost_model_;  // carries R for trajectory_cost
  std::vector<GridEntry> grid_;
};

/// Weighted controllability Gramian
///   G(t) = int_0^t e^{A(t-s)} B R^{-1} B' e^{A'(t-s)} ds
/// via the block exponential of [[A, BR^{-1}B'], [0, -A']] (Van Loan).
StateMatrix weighted_gramian(const LinearSystem& sys, double t);

/// Closed-form optimal cost of the fixed-final-state problem for duration t:
///   t + d' G(t)^{-1} d,   d = x_b - e^{At} x_a.
/// Returns +inf when G(t) is numerically singular.
double full_cost_at(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b, double t);

/// Closed-form optimal cost when only the position is fixed at t:
///   t + d' (E G(t) E')^{-1} d,   d = goal - E e^{At} x_a.
double pff_cost_at(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal, double t);

/// Fixed-final-state, free-final-time optimal steering.
SteeringResult steer_full(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b);

/// Partial-final-state-free steering: position fixed at t_f, the remaining
/// final components chosen optimally (their costate vanishes at t_f).
SteeringResult steer_pff(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal);

/// Optimal cost of steer_pff without materializing the trajectory. Returns
/// +inf when no interior minimum is bracketed.
double segcost_linear(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal);

/// Optimal cost of steer_full without materializing the trajectory.
double segcost_full_linear(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b);

/// Optimal open-loop control at the start of the PFF problem from x, i.e.
/// the value of the optimal state feedback law at x.
ControlVec pff_feedback_control(const LinearSystem& sys, const StateVec& x, const PartialState& goal);

}  // namespace fmtpff
