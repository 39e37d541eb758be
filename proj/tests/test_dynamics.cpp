#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fmtpff/dynamics.hpp"
#include "fmtpff/errors.hpp"

using namespace fmtpff;

namespace {

StateVec state(double a, double b, double c, double d) {
  StateVec x;
  x << a, b, c, d;
  return x;
}

ControlVec control(double a, double b) { return ControlVec(a, b); }

// Zero-order-hold lookup by time, independent of the per-interval loop in
// trajectory_cost.
ControlVec control_at(const Trajectory& traj, double t) {
  auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  auto k = static_cast<std::size_t>(std::distance(traj.times.begin(), it));
  k = k == 0 ? 0 : k - 1;
  return traj.controls[std::min(k, traj.controls.size() - 1)];
}

// Composite Simpson on a fine sub-grid of every stored interval, with the
// control looked up by time.
double simpson_cost(const Trajectory& traj, const CostWeights& r) {
  const int sub = 20;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double a = traj.times[k];
    const double h = (traj.times[k + 1] - a) / sub;
    auto integrand = [&](double t) {
      const ControlVec u = control_at(traj, t);
      return 1.0 + u.dot(r * u);
    };
    // Right end evaluated as a left limit.
    double s = integrand(a) + integrand(a + (sub - 0.5) * h);
    for (int i = 1; i < sub; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(a + i * h);
    total += s * h / 3.0;
  }
  return total;
}

Trajectory random_di_trajectory(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  ControlSignal signal;
  signal.period = 0.1;
  for (int i = 0; i < 25; ++i) signal.values.push_back(control(u(rng), u(rng)));
  return integrate_rk4(SystemModel::double_integrator(), state(u(rng), u(rng), u(rng), u(rng)), signal, 0.01, 2.5);
}

}  // namespace

TEST_CASE("derivative of the double integrator reads off Ax + Bu") {
  const auto di = SystemModel::double_integrator();
  CHECK(derivative(di, state(0, 0, 1, 2), control(3, 4)).isApprox(state(1, 2, 3, 4)));
}

TEST_CASE("derivative of the kinematic car") {
  const auto car = SystemModel::kinematic_car();
  CHECK(derivative(car, state(0, 0, 0, 1), control(0, 0)).isApprox(state(1, 0, 0, 0)));
  const StateVec d = derivative(car, state(5, 5, std::numbers::pi / 2, 2), control(0.1, -0.2));
  CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(2.0));
  CHECK(d[2] == doctest::Approx(0.1));
  CHECK(d[3] == doctest::Approx(-0.2));
}

TEST_CASE("both systems are invariant to position shifts") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const auto& sys : {SystemModel::double_integrator(), SystemModel::kinematic_car()}) {
    for (int i = 0; i < 50; ++i) {
      const StateVec x = state(u(rng), u(rng), u(rng), u(rng));
      const ControlVec c = control(u(rng), u(rng));
      StateVec shifted = x;
      shifted[0] += u(rng);
      shifted[1] += u(rng);
      CHECK(derivative(sys, x, c) == derivative(sys, shifted, c));
    }
  }
}

TEST_CASE("integrate_rk4 on trivial inputs") {
  const auto di = SystemModel::double_integrator();
  SUBCASE("zero state and control stays put, cost equals horizon") {
    const auto traj = integrate_rk4(di, StateVec::Zero(), ControlSignal::constant(control(0, 0)), 0.03, 1.7);
    for (const auto& x : traj.states) CHECK(x.norm() == 0.0);
    CHECK(traj.cost == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(traj.times.back() == 1.7);
  }
  SUBCASE("constant unit acceleration") {
    const auto traj = integrate_rk4(di, StateVec::Zero(), ControlSignal::constant(control(1, 0)), 0.01, 1.0);
    CHECK((traj.back() - state(0.5, 0, 1, 0)).norm() < 1e-9);
    CHECK(traj.cost == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("car drives straight") {
    const auto traj = integrate_rk4(SystemModel::kinematic_car(), state(0, 0, 0, 1),
                                    ControlSignal::constant(control(0, 0)), 0.01, 1.0);
    CHECK((traj.back() - state(1, 0, 0, 1)).norm() < 1e-9);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS(integrate_rk4(di, StateVec::Zero(), ControlSignal::constant(control(0, 0)), 0.0, 1.0));
    CHECK_THROWS(integrate_rk4(di, StateVec::Zero(), ControlSignal::constant(control(0, 0)), 0.1, 0.05));
  }
  SUBCASE("non-finite state is an integration failure") {
    const double nan = std::nan("");
    CHECK_THROWS_AS(integrate_rk4(di, state(nan, 0, 0, 0), ControlSignal::constant(control(0, 0)), 0.1, 1.0),
                    IntegrationFailure);
  }
}

TEST_CASE("car controls are clamped to the unit box") {
  const auto car = SystemModel::kinematic_car();
  const auto traj = integrate_rk4(car, StateVec::Zero(), ControlSignal::constant(control(5, -7)), 0.05, 0.5);
  for (const auto& u : traj.controls) CHECK(car.control_bounds.contains(u));
  CHECK(traj.back()[3] == doctest::Approx(-0.5));
}

TEST_CASE("heading stays wrapped to (-pi, pi]") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  const auto traj = integrate_rk4(SystemModel::kinematic_car(), state(0, 0, 3.0, 1),
                                  ControlSignal::constant(control(1, 0)), 0.01, 10.0);
  for (const auto& x : traj.states) {
    CHECK(x[2] > -std::numbers::pi);
    CHECK(x[2] <= std::numbers::pi);
  }
}

TEST_CASE("RK4 convergence order on the car") {
  const auto car = SystemModel::kinematic_car();
  const StateVec x0 = state(0.2, -0.4, 0.3, 1.2);
  const auto u = ControlSignal::constant(control(0.7, -0.4));
  const double horizon = 2.0;
  const double dt = 0.1;
  const StateVec reference = integrate_rk4(car, x0, u, dt / 100, horizon).back();
  const double coarse = (integrate_rk4(car, x0, u, dt, horizon).back() - reference).norm();
  const double fine = (integrate_rk4(car, x0, u, dt / 2, horizon).back() - reference).norm();
  const double factor = coarse / fine;
  CHECK(factor >= 12.0);
  CHECK(factor <= 20.0);
}

TEST_CASE("trajectory_cost") {
  const auto di = SystemModel::double_integrator();
  SUBCASE("zero control over [0,3]") {
    const auto traj = integrate_rk4(di, StateVec::Zero(), ControlSignal::constant(control(0, 0)), 0.01, 3.0);
    CHECK(trajectory_cost(traj, di) == doctest::Approx(3.0));
  }
  SUBCASE("u = (1,1) over [0,2]") {
    const auto traj = integrate_rk4(di, StateVec::Zero(), ControlSignal::constant(control(1, 1)), 0.01, 2.0);
    CHECK(trajectory_cost(traj, di) == doctest::Approx(6.0));
  }
  SUBCASE("matches an independent Simpson recomputation") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
      const auto traj = random_di_trajectory(rng);
      const double reference = simpson_cost(traj, di.cost_weights);
      CHECK(std::abs(trajectory_cost(traj, di) - reference) <= 1e-6 * reference);
      CHECK(traj.cost >= traj.duration());
    }
  }
}

TEST_CASE("translate") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const auto di = SystemModel::double_integrator();
  const auto traj = random_di_trajectory(rng);
  CHECK(max_state_deviation(translate(traj, PartialState::Zero()), traj) == 0.0);
  for (int i = 0; i < 10; ++i) {
    const PartialState d(u(rng), u(rng));
    const auto moved = translate(traj, d);
    CHECK(max_state_deviation(translate(moved, -d), traj) < 1e-12);
    CHECK(trajectory_cost(moved, di) == doctest::Approx(trajectory_cost(traj, di)));
    CHECK(moved.times == traj.times);
    CHECK(position(moved.states[3]).isApprox(position(traj.states[3]) + d));
  }
}

TEST_CASE("resimulation reproduces integrated trajectories") {
  std::mt19937_64 rng(2);
  const auto traj = random_di_trajectory(rng);
  CHECK(max_state_deviation(resimulate(SystemModel::double_integrator(), traj), traj) < 1e-12);
}

TEST_CASE("trajectory csv round trip") {
  std::mt19937_64 rng(9);
  const auto traj = random_di_trajectory(rng);
  std::stringstream buf;
  write_trajectory_csv(buf, traj);
  const std::string text = buf.str();
  CHECK(text.rfind("t,x1,x2,x3,x4,u1,u2\n", 0) == 0);
  // Last row leaves the control cells blank.
  const auto last_line_start = text.find_last_of('\n', text.size() - 2) + 1;
  CHECK(text.substr(text.size() - 3) == ",,\n");
  CHECK(last_line_start > 0);
  const auto back = read_trajectory_csv(buf);
  CHECK(back.times == traj.times);
  CHECK(max_state_deviation(back, traj) == 0.0);
  CHECK(back.controls.size() == traj.controls.size());
}
