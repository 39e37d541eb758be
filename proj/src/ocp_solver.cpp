#include "fmtpff/ocp_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <thread>

#include "fmtpff/errors.hpp"
#include "fmtpff/random.hpp"

namespace fmtpff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kJacCols = kStateDim + kControlDim + 1;  // [dx | du | dh]
using StepJacobian = Eigen::Matrix<double, kStateDim, kJacCols>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMatrix = Eigen::Matrix<double, kStateDim, kControlDim>;

void linearize(const SystemModel& sys, const StateVec& x, StateMatrix& fx, InputMatrix& fu) {
  fx.setZero();
  fu.setZero();
  fu(2, 0) = 1.0;
  fu(3, 1) = 1.0;
  switch (sys.kind) {
    case SystemKind::DoubleIntegrator2D:
      fx(0, 2) = 1.0;
      fx(1, 3) = 1.0;
      break;
    case SystemKind::KinematicCar: {
      const double c = std::cos(x[2]);
      const double s = std::sin(x[2]);
      fx(0, 2) = -x[3] * s;
      fx(0, 3) = c;
      fx(1, 2) = x[3] * c;
      fx(1, 3) = s;
      break;
    }
  }
}

// One RK4 step (no heading wrap) and its Jacobian w.r.t. (x, u, h).
StateVec rk4_with_jacobian(const SystemModel& sys, const StateVec& x, const ControlVec& u, double h,
                           StepJacobian& jac) {
  StateMatrix fx;
  InputMatrix fu;
  StepJacobian d_x0 = StepJacobian::Zero();
  d_x0.leftCols<kStateDim>().setIdentity();

  auto stage = [&](const StateVec& xs, const StepJacobian& dxs, StateVec& k, StepJacobian& dk) {
    k = derivative(sys, xs, u);
    linearize(sys, xs, fx, fu);
    dk = fx * dxs;
    dk.middleCols<kControlDim>(kStateDim) += fu;
  };

  StateVec k1, k2, k3, k4;
  StepJacobian dk1, dk2, dk3, dk4;
  stage(x, d_x0, k1, dk1);

  StepJacobian dx2 = d_x0 + 0.5 * h * dk1;
  dx2.col(kJacCols - 1) += 0.5 * k1;
  stage(x + 0.5 * h * k1, dx2, k2, dk2);

  StepJacobian dx3 = d_x0 + 0.5 * h * dk2;
  dx3.col(kJacCols - 1) += 0.5 * k2;
  stage(x + 0.5 * h * k2, dx3, k3, dk3);

  StepJacobian dx4 = d_x0 + h * dk3;
  dx4.col(kJacCols - 1) += k3;
  stage(x + h * k3, dx4, k4, dk4);

  const StateVec incr = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  jac = d_x0 + h / 6.0 * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
  jac.col(kJacCols - 1) += incr;
  return x + h * incr;
}

// Maps unconstrained decision variables to controls and duration.
class Transcription {
 public:
  Transcription(const TranscriptionProblem& p) : p_(p), intervals_(p.num_nodes - 1) {
    const auto& box = p.system.control_bounds;
    for (int i = 0; i < kControlDim; ++i) {
      bounded_[i] = std::isfinite(box.lower[i]) && std::isfinite(box.upper[i]);
      mid_[i] = bounded_[i] ? 0.5 * (box.lower[i] + box.upper[i]) : 0.0;
      half_[i] = bounded_[i] ? 0.5 * (box.upper[i] - box.lower[i]) : 1.0;
    }
    log_lo_ = std::log(p.tf_lower);
    log_span_ = std::log(p.tf_upper) - log_lo_;
    jac_.resize(static_cast<std::size_t>(intervals_));
  }

  int intervals() const { return intervals_; }
  int size() const { return kControlDim * intervals_ + 1; }

  double tf(double s) const { return std::exp(log_lo_ + log_span_ * sigmoid(s)); }
  double tf_slope(double s) const {
    const double g = sigmoid(s);
    return tf(s) * log_span_ * g * (1.0 - g);
  }
  double s_for_tf(double tf) const {
    const double g = std::clamp((std::log(tf) - log_lo_) / log_span_, 1e-6, 1.0 - 1e-6);
    return std::log(g / (1.0 - g));
  }

  ControlVec control(const Eigen::VectorXd& v, int k) const {
    ControlVec u;
    for (int i = 0; i < kControlDim; ++i) {
      const double z = v[kControlDim * k + i];
      u[i] = bounded_[i] ? mid_[i] + half_[i] * std::tanh(z) : z;
    }
    return u;
  }
  double z_for(double u, int i) const {
    if (!bounded_[i]) return u;
    return std::atanh(std::clamp((u - mid_[i]) / half_[i], -0.999, 0.999));
  }

  struct Eval {
    double penalized = kInf;
    double cost = kInf;
    double residual = kInf;
  };

  // Penalized objective; fills grad when non-null.
  Eval evaluate(const Eigen::VectorXd& v, double weight, Eigen::VectorXd* grad) {
    const double s = v[size() - 1];
    const double duration = tf(s);
    const double h = duration / intervals_;
    const CostWeights& r = p_.system.cost_weights;
    StateVec x = p_.x0;
    double effort = 0.0;
    for (int k = 0; k < intervals_; ++k) {
      const ControlVec u = control(v, k);
      effort += u.dot(r * u);
      x = rk4_with_jacobian(p_.system, x, u, h, jac_[k]);
    }
    Eigen::Vector<double, kStateDim> residual = Eigen::Vector<double, kStateDim>::Zero();
    if (p_.full_goal) {
      residual = x - *p_.full_goal;
    } else {
      residual.head<kPartialDim>() = position(x) - p_.goal;
    }
    Eval e;
    e.cost = duration + h * effort;
    e.residual = residual.norm();
    e.penalized = e.cost + weight * residual.squaredNorm();
    if (!std::isfinite(e.penalized)) return Eval{};
    if (grad) {
      grad->resize(size());
      StateVec lambda = 2.0 * weight * residual;
      double grad_h = effort;
      for (int k = intervals_ - 1; k >= 0; --k) {
        const ControlVec u = control(v, k);
        const ControlVec g_u = 2.0 * h * (r * u) + jac_[k].middleCols<kControlDim>(kStateDim).transpose() * lambda;
        for (int i = 0; i < kControlDim; ++i) {
          const double z = v[kControlDim * k + i];
          const double du_dz = bounded_[i] ? half_[i] * (1.0 - std::tanh(z) * std::tanh(z)) : 1.0;
          (*grad)[kControlDim * k + i] = g_u[i] * du_dz;
        }
        grad_h += lambda.dot(jac_[k].col(kJacCols - 1));
        lambda = jac_[k].leftCols<kStateDim>().transpose() * lambda;
      }
      (*grad)[size() - 1] = (1.0 + grad_h / intervals_) * tf_slope(s);
    }
    return e;
  }

  Trajectory trajectory(const Eigen::VectorXd& v) const {
    const double duration = tf(v[size() - 1]);
    const double h = duration / intervals_;
    Trajectory traj;
    StateVec x = normalize_state(p_.system, p_.x0);
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (int k = 0; k < intervals_; ++k) {
      const ControlVec u = control(v, k);
      x = rk4_step(p_.system, x, u, h);
      traj.controls.push_back(u);
      traj.states.push_back(x);
      traj.times.push_back(k + 1 == intervals_ ? duration : (k + 1) * h);
    }
    traj.cost = trajectory_cost(traj, p_.system);
    return traj;
  }

 private:
  static double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

  const TranscriptionProblem& p_;
  int intervals_;
  bool bounded_[kControlDim];
  double mid_[kControlDim];
  double half_[kControlDim];
  double log_lo_ = 0.0;
  double log_span_ = 1.0;
  std::vector<StepJacobian> jac_;
};

// Limited-memory BFGS with Armijo backtracking. Returns iterations used.
int minimize_lbfgs(Transcription& tr, double weight, Eigen::VectorXd& v, const SolverSettings& settings) {
  Eigen::VectorXd g;
  double f = tr.evaluate(v, weight, &g).penalized;
  if (!std::isfinite(f)) return 0;
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd v_new, g_new;
  int stalled = 0;
  int it = 0;
  for (; it < settings.max_iterations_per_stage; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < settings.gradient_tolerance) break;

    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Eigen::VectorXd dir = gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += s_hist[i] * (alpha[i] - beta);
    }
    dir = -dir;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>()) : 1.0;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      v_new = v + step * dir;
      f_new = tr.evaluate(v_new, weight, &g_new).penalized;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = v_new - v;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == settings.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    const double decrease = f - f_new;
    v.swap(v_new);
    g.swap(g_new);
    f = f_new;
    stalled = decrease <= 1e-13 * (1.0 + std::abs(f)) ? stalled + 1 : 0;
    if (stalled >= 5) break;
  }
  return it;
}

struct StartResult {
  Eigen::VectorXd v;
  double cost = kInf;
  double residual = kInf;
  std::vector<double> stage_residuals;
  int iterations = 0;
};

Eigen::VectorXd initial_guess(Transcription& tr, const TranscriptionProblem& p, int start) {
  const PartialState delta = p.goal - position(p.x0);
  const double dist = delta.norm();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(tr.size());
  double duration = 1.0;
  if (start == 0) {
    // Straight-line heuristic: constant acceleration along the line to the goal.
    duration = std::clamp(1.0 + 2.0 * std::sqrt(dist), p.tf_lower * 1.5, p.tf_upper * 0.9);
    ControlVec u = ControlVec::Zero();
    if (p.system.kind == SystemKind::DoubleIntegrator2D) {
      u = 2.0 * (delta - p.x0.tail<2>() * duration) / (duration * duration);
    } else {
      // Goals behind the car are approached in reverse.
      const double bearing = std::atan2(delta[1], delta[0]);
      double turn = wrap_angle(bearing - p.x0[2]);
      double signed_dist = dist;
      if (std::abs(turn) > 0.5 * std::numbers::pi) {
        turn = wrap_angle(turn + std::numbers::pi);
        signed_dist = -dist;
      }
      u[0] = turn / duration;
      u[1] = 2.0 * (signed_dist - p.x0[3] * duration) / (duration * duration);
    }
    // Stay clear of saturation, where the tanh parametrization has no slope.
    const ControlBox& box = p.system.control_bounds;
    u = u.cwiseMax(0.8 * box.lower).cwiseMin(0.8 * box.upper);
    for (int k = 0; k < tr.intervals(); ++k) {
      for (int i = 0; i < kControlDim; ++i) v[kControlDim * k + i] = tr.z_for(u[i], i);
    }
  } else {
    duration = std::clamp(start == 1 ? 1.0 + 0.5 * dist : 2.0 + dist, p.tf_lower * 1.5, p.tf_upper * 0.9);
  }
  v[tr.size() - 1] = tr.s_for_tf(duration);
  return v;
}

}  // namespace

void TranscriptionProblem::validate() const {
  require(num_nodes >= 10, "transcription: num_nodes must be at least 10");
  require(tf_lower > 0.0 && tf_upper > tf_lower, "transcription: invalid t_f bounds");
  require(x0.allFinite() && goal.allFinite(), "transcription: boundary conditions must be finite");
  system.validate();
}

SolveReport solve_pff_numeric_report(const TranscriptionProblem& problem, const SolverSettings& settings) {
  problem.validate();
  require(!settings.penalty_schedule.empty(), "solver: empty penalty schedule");
  Transcription tr(problem);
  StartResult best;
  int best_start = -1;
  StartResult least_infeasible;
  int total_iterations = 0;
  constexpr int kStarts = 3;
  for (int start = 0; start < kStarts; ++start) {
    StartResult run;
    run.v = initial_guess(tr, problem, start);
    for (double weight : settings.penalty_schedule) {
      run.iterations += minimize_lbfgs(tr, weight, run.v, settings);
      run.stage_residuals.push_back(tr.evaluate(run.v, weight, nullptr).residual);
    }
    total_iterations += run.iterations;
    const auto final_eval = tr.evaluate(run.v, settings.penalty_schedule.back(), nullptr);
    run.cost = final_eval.cost;
    run.residual = final_eval.residual;
    if (run.residual <= settings.feasibility_tolerance) {
      if (run.cost < best.cost) {
        best = run;
        best_start = start;
      }
    } else if (run.residual < least_infeasible.residual) {
      least_infeasible = run;
    }
  }

  SolveReport report;
  report.total_iterations = total_iterations;
  if (best_start < 0) {
    report.result = steering_failure(least_infeasible.residual);
    report.stage_residuals = least_infeasible.stage_residuals;
    return report;
  }
  SteeringResult& r = report.result;
  r.trajectory = tr.trajectory(best.v);
  r.final_state = r.trajectory.back();
  r.tf = r.trajectory.times.back();
  r.cost = r.trajectory.cost;
  r.endpoint_error = best.residual;
  r.success = true;
  report.stage_residuals = best.stage_residuals;
  report.winning_start = best_start;
  return report;
}

SteeringResult solve_pff_numeric(const TranscriptionProblem& problem, const SolverSettings& settings) {
  return solve_pff_numeric_report(problem, settings).result;
}

Dataset generate_dataset(const SystemModel& system, int n, std::uint64_t seed, const StateBox& box,
                         const GenerationSettings& settings, GenerationReport* report) {
  require(n >= 1, "generate_dataset: n must be at least 1");
  std::vector<std::optional<Trajectory>> solved(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      TranscriptionProblem p;
      p.system = system;
      for (int d = 0; d < kStateDim; ++d) p.x0[d] = uniform(rng, box.lower[d], box.upper[d]);
      p.x0 = normalize_state(system, p.x0);
      p.goal = PartialState::Zero();
      p.num_nodes = settings.num_nodes;
      p.tf_lower = settings.tf_lower;
      p.tf_upper = settings.tf_upper;
      SteeringResult r = solve_pff_numeric(p, settings.solver);
      if (r.success && position(r.trajectory.back()).norm() <= settings.solver.feasibility_tolerance) {
        solved[static_cast<std::size_t>(i)] = std::move(r.trajectory);
      }
    }
  };
  unsigned workers = settings.workers ? settings.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  Dataset data;
  GenerationReport local;
  local.attempted = n;
  for (const auto& traj : solved) {
    if (!traj) continue;
    ++local.solved;
    for (std::size_t k = 0; k < traj->controls.size(); ++k) {
      std::optional<double> cost;
      if (k == 0) cost = traj->cost;
      data.append(traj->states[k], traj->controls[k], cost);
    }
  }
  if (report) *report = local;
  if (local.success_rate() < 0.5) {
    throw GenerationAborted("dataset generation aborted: only " + std::to_string(local.solved) + " of " +
                            std::to_string(n) + " instances solved");
  }
  return data;
}

}  // namespace fmtpff
