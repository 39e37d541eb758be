#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fmtpff {

// Both shipped systems share these dimensions: the state is position (2)
// followed by two further components, the control is 2-D.
inline constexpr int kStateDim = 4;
inline constexpr int kControlDim = 2;
inline constexpr int kPartialDim = 2;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using ControlVec = Eigen::Matrix<double, kControlDim, 1>;
using PartialState = Eigen::Matrix<double, kPartialDim, 1>;
using CostWeights = Eigen::Matrix<double, kControlDim, kControlDim>;

enum class SystemKind { DoubleIntegrator2D, KinematicCar };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

struct ControlBox {
  ControlVec lower;
  ControlVec upper;

  bool contains(const ControlVec& u) const;
  ControlVec clamp(const ControlVec& u) const;
};

/// Continuous-time model x' = f(x, u) with running cost 1 + u'Ru.
///
/// Double integrator: x = [px py vx vy], u = acceleration, unbounded.
/// Kinematic car: x = [px py heading speed], u = [turn rate, acceleration],
/// each bounded to [-1, 1]. The heading is kept wrapped to (-pi, pi].
struct SystemModel {
  SystemKind kind = SystemKind::DoubleIntegrator2D;
  ControlBox control_bounds;
  CostWeights cost_weights = CostWeights::Identity();

  static SystemModel double_integrator();
  static SystemModel kinematic_car();

  // Throws ContractViolation when R is not SPD or the bounds are empty.
  void validate() const;
};

/// Time-indexed states with zero-order-hold controls.
///
/// controls[k] acts on [times[k], times[k+1]); there is one fewer control
/// than there are states.
struct Trajectory {
  std::vector<double> times;
  std::vector<StateVec> states;
  std::vector<ControlVec> controls;
  double cost = 0.0;

  bool empty() const { return states.empty(); }
  std::size_t size() const { return states.size(); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
  const StateVec& front() const { return states.front(); }
  const StateVec& back() const { return states.back(); }
};

/// Piecewise-constant control signal sampled with a fixed period. Past the
/// last sample the final value is held.
struct ControlSignal {
  std::vector<ControlVec> values;
  double period = 0.0;

  ControlVec at(double t) const;
  static ControlSignal constant(const ControlVec& u, double period = 1.0);
};

inline PartialState position(const StateVec& x) { return x.head<kPartialDim>(); }

double wrap_angle(double angle);

// Canonicalises the state representation (heading wrap for the car).
StateVec normalize_state(const SystemModel& system, StateVec x);

StateVec derivative(const SystemModel& system, const StateVec& x, const ControlVec& u);

/// One classic RK4 step with the control held constant. The control is
/// clamped to the system's bounds first.
StateVec rk4_step(const SystemModel& system, const StateVec& x, const ControlVec& u, double dt);

double running_cost(const SystemModel& system, const ControlVec& u);

/// Fixed-step RK4 from x0 over [0, horizon]. The final step is shortened when
/// horizon is not a multiple of dt. Throws IntegrationFailure on a non-finite
/// state.
Trajectory integrate_rk4(const SystemModel& system, const StateVec& x0, const ControlSignal& controls,
                         double dt, double horizon);

/// Re-integrates the stored controls of traj from its first state, one RK4
/// step per stored interval.
Trajectory resimulate(const SystemModel& system, const Trajectory& traj);

/// Integral of 1 + u'Ru over the trajectory. Controls are zero-order-hold, so
/// the integrand is constant on each interval and the quadrature is exact.
double trajectory_cost(const Trajectory& traj, const SystemModel& system);

/// Shifts the position components of every state by offset.
Trajectory translate(Trajectory traj, const PartialState& offset);

/// Largest infinity-norm difference between corresponding states.
double max_state_deviation(const Trajectory& a, const Trajectory& b);

/// Appends next to base. next must start where base ends (its first knot is
/// dropped); times are shifted so the result is monotone.
void append_trajectory(Trajectory& base, const Trajectory& next);

// CSV with header t,x1..x4,u1,u2; the control cells of the last row are blank.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace fmtpff
