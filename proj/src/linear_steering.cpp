#include "fmtpff/linear_steering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "fmtpff/errors.hpp"

namespace fmtpff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kAugDim = 2 * kStateDim;
using AugMatrix = Eigen::Matrix<double, kAugDim, kAugDim>;
using ControllabilityMatrix = Eigen::Matrix<double, kStateDim, kStateDim * kControlDim>;

StateMatrix van_loan_gramian(const StateMatrix& a, const StateMatrix& q, double t) {
  AugMatrix m = AugMatrix::Zero();
  m.topLeftCorner<kStateDim, kStateDim>() = a;
  m.topRightCorner<kStateDim, kStateDim>() = q;
  m.bottomRightCorner<kStateDim, kStateDim>() = -a.transpose();
  const AugMatrix e = (m * t).exp();
  const StateMatrix g = e.topRightCorner<kStateDim, kStateDim>() * e.topLeftCorner<kStateDim, kStateDim>().transpose();
  return 0.5 * (g + g.transpose());
}

// Optimal cost and final costate for one candidate duration.
struct CandidateCost {
  double cost = kInf;
  StateVec costate = StateVec::Zero();
};

CandidateCost full_candidate(const StateMatrix& phi, const StateMatrix& g, const StateVec& x_a, const StateVec& x_b,
                             double t) {
  const StateVec d = x_b - phi * x_a;
  Eigen::LLT<StateMatrix> llt(g);
  if (llt.info() != Eigen::Success) return {};
  CandidateCost c;
  c.costate = llt.solve(d);
  c.cost = t + d.dot(c.costate);
  if (!std::isfinite(c.cost)) return {};
  return c;
}

CandidateCost pff_candidate(const Selector& e, const StateMatrix& phi, const StateMatrix& g, const StateVec& x_a,
                            const PartialState& goal, double t) {
  const PartialState d = goal - e * (phi * x_a);
  const Eigen::Matrix<double, kPartialDim, kPartialDim> s = e * g * e.transpose();
  Eigen::LLT<Eigen::Matrix<double, kPartialDim, kPartialDim>> llt(s);
  if (llt.info() != Eigen::Success) return {};
  const PartialState nu = llt.solve(d);
  CandidateCost c;
  // Transversality: the costate of the free components vanishes at t_f.
  c.costate = e.transpose() * nu;
  c.cost = t + d.dot(nu);
  if (!std::isfinite(c.cost)) return {};
  return c;
}

struct TfSearch {
  double tf = 0.0;
  CandidateCost best;
};

// Coarse log-spaced grid over [t_min, t_max] followed by golden-section
// refinement inside the bracket around the best grid point. A minimum at
// the upper end of the grid means no interior minimum was bracketed.
template <typename GridEval, typename Eval>
std::optional<TfSearch> minimize_duration(const LinearSystem& sys, GridEval grid_eval, Eval eval) {
  const auto& grid = sys.grid();
  std::size_t best_index = 0;
  double best_cost = kInf;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = grid_eval(grid[i]).cost;
    if (c < best_cost) {
      best_cost = c;
      best_index = i;
    }
  }
  if (!std::isfinite(best_cost) || best_index + 1 == grid.size()) return std::nullopt;

  double lo = grid[best_index == 0 ? 0 : best_index - 1].t;
  double hi = grid[best_index + 1].t;
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = eval(x1).cost;
  double f2 = eval(x2).cost;
  while (hi - lo > sys.options().refine_tolerance) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = eval(x1).cost;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = eval(x2).cost;
    }
  }
  TfSearch result;
  result.tf = f1 <= f2 ? x1 : x2;
  result.best = eval(result.tf);
  if (best_cost < result.best.cost) {
    result.tf = grid[best_index].t;
    result.best = grid_eval(grid[best_index]);
  }
  if (!std::isfinite(result.best.cost)) return std::nullopt;
  return result;
}

std::optional<TfSearch> search_full(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b) {
  return minimize_duration(
      sys, [&](const LinearSystem::GridEntry& g) { return full_candidate(g.transition, g.gramian, x_a, x_b, g.t); },
      [&](double t) { return full_candidate(sys.transition(t), sys.gramian(t), x_a, x_b, t); });
}

std::optional<TfSearch> search_pff(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal) {
  const Selector& e = sys.selector();
  return minimize_duration(
      sys,
      [&](const LinearSystem::GridEntry& g) { return pff_candidate(e, g.transition, g.gramian, x_a, goal, g.t); },
      [&](double t) { return pff_candidate(e, sys.transition(t), sys.gramian(t), x_a, goal, t); });
}

// Exact RK4 propagator of the linear ODE over one step h with constant u:
// x+ = Phi x + Gamma u.
void rk4_linear_step_matrices(const StateMatrix& a, const InputMatrix& b, double h, StateMatrix& phi,
                              InputMatrix& gamma) {
  const StateMatrix ah = a * h;
  const StateMatrix ah2 = ah * ah;
  const StateMatrix ah3 = ah2 * ah;
  const StateMatrix id = StateMatrix::Identity();
  phi = id + ah + ah2 / 2.0 + ah3 / 6.0 + ah3 * ah / 24.0;
  gamma = h * (id + ah / 2.0 + ah2 / 6.0 + ah3 / 24.0) * b;
}

// Samples the continuous optimal control u(s) = R^-1 B' e^{A'(tf-s)} costate
// at interval midpoints, then applies the minimum-energy correction that
// makes the discrete RK4/ZOH trajectory hit x_target exactly.
std::optional<Trajectory> materialize(const LinearSystem& sys, const StateVec& x_a, double tf,
                                      const StateVec& costate, const StateVec& x_target) {
  const double dt = sys.options().dt;
  // Short horizons still get enough steps for the ZOH energy to track the
  // continuous cost.
  constexpr int kMinSteps = 20;
  const int n = std::max(kMinSteps, static_cast<int>(std::ceil(tf / dt - 1e-9)));
  const double h = tf / n;
  const StateMatrix& a = sys.a();
  const InputMatrix& b = sys.b();
  const CostWeights r_inv = sys.r().inverse();

  std::vector<ControlVec> u(static_cast<std::size_t>(n));
  const StateMatrix step_back = (a.transpose() * h).exp();
  StateMatrix prop = (a.transpose() * (0.5 * h)).exp();
  for (int k = n - 1; k >= 0; --k) {
    u[k] = r_inv * b.transpose() * prop * costate;
    prop = step_back * prop;
  }

  StateMatrix phi;
  InputMatrix gamma;
  rk4_linear_step_matrices(a, b, h, phi, gamma);

  StateVec x = x_a;
  for (int k = 0; k < n; ++k) x = phi * x + gamma * u[k];

  // Backward sweep: M_k = Phi^{n-1-k}; W = sum M_k Gamma R^-1 Gamma' M_k'.
  std::vector<InputMatrix> reach(static_cast<std::size_t>(n));
  StateMatrix w = StateMatrix::Zero();
  StateMatrix m = StateMatrix::Identity();
  for (int k = n - 1; k >= 0; --k) {
    reach[k] = m * gamma;
    w += reach[k] * r_inv * reach[k].transpose();
    m = m * phi;
  }
  Eigen::LLT<StateMatrix> llt(w);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const StateVec multiplier = llt.solve(x_target - x);
  for (int k = 0; k < n; ++k) u[k] += r_inv * reach[k].transpose() * multiplier;

  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.states.reserve(n + 1);
  x = x_a;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (int k = 0; k < n; ++k) {
    x = phi * x + gamma * u[k];
    traj.times.push_back(k + 1 == n ? tf : (k + 1) * h);
    traj.states.push_back(x);
  }
  traj.controls = std::move(u);
  traj.cost = trajectory_cost(traj, sys.cost_model());
  return traj;
}

enum class Boundary { FullState, PositionOnly };

SteeringResult finish(const LinearSystem& sys, const StateVec& x_a, const TfSearch& search, const StateVec& x_target,
                      Boundary boundary) {
  auto traj = materialize(sys, x_a, search.tf, search.best.costate, x_target);
  if (!traj) return steering_failure();
  SteeringResult result;
  result.tf = search.tf;
  result.cost = search.best.cost;
  result.final_state = traj->back();
  if (boundary == Boundary::PositionOnly) {
    result.endpoint_error = (sys.selector() * (traj->back() - x_target)).norm();
  } else {
    result.endpoint_error = (traj->back() - x_target).norm();
  }
  if (std::abs(traj->cost - result.cost) > 0.01 * result.cost) {
    throw std::logic_error("linear steering: closed-form cost disagrees with materialized trajectory");
  }
  result.trajectory = std::move(*traj);
  result.success = result.endpoint_error <= sys.options().endpoint_tolerance;
  return result;
}

}  // namespace

LinearSystem::LinearSystem(const StateMatrix& a, const InputMatrix& b, const CostWeights& r,
                           LinearSteeringOptions options)
    : a_(a), b_(b), r_(r), options_(options) {
  require(r_.isApprox(r_.transpose()), "LinearSystem: R must be symmetric");
  Eigen::LLT<CostWeights> r_llt(r_);
  require(r_llt.info() == Eigen::Success, "LinearSystem: R must be positive definite");
  r_inv_ = r_llt.solve(CostWeights::Identity());

  ControllabilityMatrix kalman;
  StateMatrix power = StateMatrix::Identity();
  for (int i = 0; i < kStateDim; ++i) {
    kalman.middleCols<kControlDim>(i * kControlDim) = power * b_;
    power = power * a_;
  }
  require(Eigen::FullPivLU<ControllabilityMatrix>(kalman).rank() == kStateDim, "LinearSystem: (A, B) is not controllable");
  require(options_.t_min > 0.0 && options_.t_max > options_.t_min, "LinearSystem: invalid t_f search range");
  require(options_.grid_points >= 3, "LinearSystem: t_f grid needs at least 3 points");
  require(options_.dt > 0.0, "LinearSystem: dt must be positive");

  selector_.setZero();
  for (int i = 0; i < kPartialDim; ++i) selector_(i, i) = 1.0;

  cost_model_ = SystemModel::double_integrator();
  cost_model_.cost_weights = r_;

  grid_.reserve(static_cast<std::size_t>(options_.grid_points));
  const double log_lo = std::log(options_.t_min);
  const double log_hi = std::log(options_.t_max);
  for (int i = 0; i < options_.grid_points; ++i) {
    const double t = std::exp(log_lo + (log_hi - log_lo) * i / (options_.grid_points - 1));
    grid_.push_back({t, transition(t), gramian(t)});
  }
}

LinearSystem LinearSystem::double_integrator(const CostWeights& r, LinearSteeringOptions options) {
  StateMatrix a = StateMatrix::Zero();
  a.topRightCorner<2, 2>().setIdentity();
  InputMatrix b = InputMatrix::Zero();
  b.bottomRows<2>().setIdentity();
  return LinearSystem(a, b, r, options);
}

StateMatrix LinearSystem::transition(double t) const { return (a_ * t).exp(); }

StateMatrix LinearSystem::gramian(double t) const {
  return van_loan_gramian(a_, b_ * r_inv_ * b_.transpose(), t);
}

StateMatrix weighted_gramian(const LinearSystem& sys, double t) {
  require(t > 0.0, "weighted_gramian: t must be positive");
  return sys.gramian(t);
}

double full_cost_at(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b, double t) {
  require(t > 0.0, "full_cost_at: t must be positive");
  return full_candidate(sys.transition(t), sys.gramian(t), x_a, x_b, t).cost;
}

double pff_cost_at(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal, double t) {
  require(t > 0.0, "pff_cost_at: t must be positive");
  return pff_candidate(sys.selector(), sys.transition(t), sys.gramian(t), x_a, goal, t).cost;
}

SteeringResult steer_full(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b) {
  require(x_a.allFinite() && x_b.allFinite(), "steer_full: boundary states must be finite");
  const auto search = search_full(sys, x_a, x_b);
  if (!search) return steering_failure();
  return finish(sys, x_a, *search, x_b, Boundary::FullState);
}

SteeringResult steer_pff(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal) {
  require(x_a.allFinite() && goal.allFinite(), "steer_pff: boundary conditions must be finite");
  const auto search = search_pff(sys, x_a, goal);
  if (!search) return steering_failure();
  // Optimal full final state: drift plus the Gramian-weighted costate.
  const double t = search->tf;
  const StateVec x_target = sys.transition(t) * x_a + sys.gramian(t) * search->best.costate;
  return finish(sys, x_a, *search, x_target, Boundary::PositionOnly);
}

double segcost_linear(const LinearSystem& sys, const StateVec& x_a, const PartialState& goal) {
  const auto search = search_pff(sys, x_a, goal);
  return search ? search->best.cost : kInf;
}

double segcost_full_linear(const LinearSystem& sys, const StateVec& x_a, const StateVec& x_b) {
  const auto search = search_full(sys, x_a, x_b);
  return search ? search->best.cost : kInf;
}

ControlVec pff_feedback_control(const LinearSystem& sys, const StateVec& x, const PartialState& goal) {
  const auto search = search_pff(sys, x, goal);
  require(search.has_value(), "pff_feedback_control: no optimal duration bracketed");
  return sys.r().inverse() * sys.b().transpose() * sys.transition(search->tf).transpose() * search->best.costate;
}

}  // namespace fmtpff
