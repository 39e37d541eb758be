#include "fmtpff/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "fmtpff/errors.hpp"
#include "fmtpff/format.hpp"

namespace fmtpff {

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::DoubleIntegrator2D:
      return "double_integrator";
    case SystemKind::KinematicCar:
      return "car";
  }
  return "unknown";
}

SystemKind system_kind_from_string(const std::string& name) {
  if (name == "double_integrator" || name == "di") return SystemKind::DoubleIntegrator2D;
  if (name == "car") return SystemKind::KinematicCar;
  throw ContractViolation("unknown system '" + name + "'");
}

bool ControlBox::contains(const ControlVec& u) const {
  return (u.array() >= lower.array()).all() && (u.array() <= upper.array()).all();
}

ControlVec ControlBox::clamp(const ControlVec& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

SystemModel SystemModel::double_integrator() {
  SystemModel m;
  m.kind = SystemKind::DoubleIntegrator2D;
  const double inf = std::numeric_limits<double>::infinity();
  m.control_bounds = {ControlVec::Constant(-inf), ControlVec::Constant(inf)};
  return m;
}

SystemModel SystemModel::kinematic_car() {
  SystemModel m;
  m.kind = SystemKind::KinematicCar;
  m.control_bounds = {ControlVec::Constant(-1.0), ControlVec::Constant(1.0)};
  return m;
}

void SystemModel::validate() const {
  require((control_bounds.lower.array() < control_bounds.upper.array()).all(), "control bounds are empty");
  require(cost_weights.isApprox(cost_weights.transpose()), "R must be symmetric");
  Eigen::LLT<CostWeights> llt(cost_weights);
  require(llt.info() == Eigen::Success, "R must be positive definite");
}

ControlVec ControlSignal::at(double t) const {
  require(!values.empty(), "control signal is empty");
  if (period <= 0.0 || t <= 0.0) return values.front();
  const auto k = static_cast<std::size_t>(std::floor(t / period + 1e-9));
  return values[std::min(k, values.size() - 1)];
}

ControlSignal ControlSignal::constant(const ControlVec& u, double period) { return {{u}, period}; }

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  a -= std::numbers::pi;
  // fmod maps +pi to -pi; the canonical range is (-pi, pi].
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

StateVec normalize_state(const SystemModel& system, StateVec x) {
  if (system.kind == SystemKind::KinematicCar) x[2] = wrap_angle(x[2]);
  return x;
}

StateVec derivative(const SystemModel& system, const StateVec& x, const ControlVec& u) {
  StateVec dx;
  switch (system.kind) {
    case SystemKind::DoubleIntegrator2D:
      dx << x[2], x[3], u[0], u[1];
      break;
    case SystemKind::KinematicCar:
      dx << x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), u[0], u[1];
      break;
  }
  return dx;
}

StateVec rk4_step(const SystemModel& system, const StateVec& x, const ControlVec& u, double dt) {
  const ControlVec uc = system.control_bounds.clamp(u);
  const StateVec k1 = derivative(system, x, uc);
  const StateVec k2 = derivative(system, x + 0.5 * dt * k1, uc);
  const StateVec k3 = derivative(system, x + 0.5 * dt * k2, uc);
  const StateVec k4 = derivative(system, x + dt * k3, uc);
  return normalize_state(system, x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

double running_cost(const SystemModel& system, const ControlVec& u) {
  return 1.0 + u.dot(system.cost_weights * u);
}

namespace {

void check_finite(const StateVec& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite state at t=" << t;
    throw IntegrationFailure(msg.str());
  }
}

}  // namespace

Trajectory integrate_rk4(const SystemModel& system, const StateVec& x0, const ControlSignal& controls,
                         double dt, double horizon) {
  require(dt > 0.0, "integrate_rk4: dt must be positive");
  require(horizon >= dt, "integrate_rk4: horizon must be at least dt");
  Trajectory traj;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.controls.reserve(steps);

  StateVec x = normalize_state(system, x0);
  check_finite(x, 0.0);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double h = std::min(dt, horizon - t);
    const ControlVec u = system.control_bounds.clamp(controls.at(t));
    x = rk4_step(system, x, u, h);
    check_finite(x, t + h);
    traj.controls.push_back(u);
    traj.states.push_back(x);
    traj.times.push_back(k + 1 == steps ? horizon : t + h);
  }
  traj.cost = trajectory_cost(traj, system);
  return traj;
}

Trajectory resimulate(const SystemModel& system, const Trajectory& traj) {
  Trajectory out;
  if (traj.empty()) return out;
  out.times = traj.times;
  out.controls = traj.controls;
  out.states.reserve(traj.size());
  StateVec x = traj.states.front();
  out.states.push_back(x);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    x = rk4_step(system, x, traj.controls[k], traj.times[k + 1] - traj.times[k]);
    check_finite(x, traj.times[k + 1]);
    out.states.push_back(x);
  }
  out.cost = trajectory_cost(out, system);
  return out;
}

double trajectory_cost(const Trajectory& traj, const SystemModel& system) {
  double cost = 0.0;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    cost += (traj.times[k + 1] - traj.times[k]) * running_cost(system, traj.controls[k]);
  }
  return cost;
}

Trajectory translate(Trajectory traj, const PartialState& offset) {
  for (auto& x : traj.states) x.head<kPartialDim>() += offset;
  return traj;
}

double max_state_deviation(const Trajectory& a, const Trajectory& b) {
  require(a.size() == b.size(), "max_state_deviation: trajectories differ in length");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    StateVec d = a.states[k] - b.states[k];
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return worst;
}

void append_trajectory(Trajectory& base, const Trajectory& next) {
  if (next.empty()) return;
  if (base.empty()) {
    base = next;
    return;
  }
  const double offset = base.times.back() - next.times.front();
  for (std::size_t k = 1; k < next.size(); ++k) {
    base.times.push_back(next.times[k] + offset);
    base.states.push_back(next.states[k]);
  }
  base.controls.insert(base.controls.end(), next.controls.begin(), next.controls.end());
  base.cost += next.cost;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t";
  for (int i = 0; i < kStateDim; ++i) out << ",x" << i + 1;
  for (int i = 0; i < kControlDim; ++i) out << ",u" << i + 1;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.times[k]);
    for (int i = 0; i < kStateDim; ++i) out << ',' << format_double(traj.states[k][i]);
    for (int i = 0; i < kControlDim; ++i) {
      out << ',';
      if (k < traj.controls.size()) out << format_double(traj.controls[k][i]);
    }
    out << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory traj;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "trajectory csv: missing header");
  require(line.rfind("t,x1", 0) == 0, "trajectory csv: unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == 1 + kStateDim + kControlDim, "trajectory csv: wrong column count");
    traj.times.push_back(parse_double(cells[0]));
    StateVec x;
    for (int i = 0; i < kStateDim; ++i) x[i] = parse_double(cells[1 + i]);
    traj.states.push_back(x);
    if (!cells[1 + kStateDim].empty()) {
      ControlVec u;
      for (int i = 0; i < kControlDim; ++i) u[i] = parse_double(cells[1 + kStateDim + i]);
      traj.controls.push_back(u);
    }
  }
  require(traj.controls.size() + 1 == traj.states.size() || traj.empty(),
          "trajectory csv: controls must be blank on exactly the last row");
  return traj;
}

}  // namespace fmtpff
