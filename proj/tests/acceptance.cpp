// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// when any of them fails. Artifacts (benchmark tables, chart, car dataset and
// models) are written to --workdir.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmtpff/backends.hpp"
#include "fmtpff/benchmark.hpp"
#include "fmtpff/environment.hpp"
#include "fmtpff/learning.hpp"
#include "fmtpff/linear_steering.hpp"
#include "fmtpff/ocp_solver.hpp"
#include "fmtpff/planner.hpp"
#include "fmtpff/random.hpp"

using namespace fmtpff;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

StateVec random_di_state(Rng& rng) {
  const StateBox box = StateBox::double_integrator_training();
  StateVec x;
  for (int i = 0; i < kStateDim; ++i) x[i] = uniform(rng, box.lower[i], box.upper[i]);
  return x;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& write) {
  std::ofstream out(path);
  write(out);
}

PartialState random_position(Rng& rng) { return PartialState(uniform(rng, -4, 4), uniform(rng, -4, 4)); }

StateVec interpolate(const Trajectory& traj, double t) {
  auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
  if (it == traj.times.begin()) return traj.states.front();
  if (it == traj.times.end()) return traj.states.back();
  const auto k = static_cast<std::size_t>(std::distance(traj.times.begin(), it));
  const double s = (t - traj.times[k - 1]) / (traj.times[k] - traj.times[k - 1]);
  return (1 - s) * traj.states[k - 1] + s * traj.states[k];
}

PlanQuery corridor_query(int m, std::uint64_t seed) {
  const ProblemFile file = load_problem(std::string(FMTPFF_FIXTURES) + "/di_corridor_problem.json");
  PlanQuery q;
  q.env = file.problem.env;
  q.x_s = file.problem.x_s;
  q.goal = file.problem.goal;
  q.m = m;
  q.seed = seed;
  return q;
}

PlanQuery car_query(std::uint64_t seed) {
  RandomEnvParams params;
  params.keep_free = {PartialState(2, 2), PartialState(18, 18)};
  PlanQuery q;
  q.env = random_env(seed, params);
  q.x_s = StateVec(2, 2, 0, 0);
  q.goal = PartialState(18, 18);
  q.m = 1000;
  q.r = 2.5;
  q.seed = seed;
  return q;
}

Verdict oracle_equivalence() {
  const auto t0 = Clock::now();
  const LinearSystem di = LinearSystem::double_integrator();
  Rng rng(101);
  double worst_cost = 0.0;
  double worst_residual = 0.0;
  int failures = 0;
  for (int i = 0; i < 50; ++i) {
    TranscriptionProblem p;
    p.system = SystemModel::double_integrator();
    p.x0 = random_di_state(rng);
    p.goal = random_position(rng);
    const SteeringResult numeric = solve_pff_numeric(p);
    const SteeringResult exact = steer_pff(di, p.x0, p.goal);
    StateVec xb;
    xb << random_position(rng), uniform(rng, -2, 2), uniform(rng, -2, 2);
    const SteeringResult full = steer_full(di, p.x0, xb);
    if (!numeric.success || !exact.success || !full.success) {
      ++failures;
      continue;
    }
    worst_cost = std::max(worst_cost, std::abs(numeric.cost - exact.cost) / exact.cost);
    worst_residual = std::max(worst_residual, (full.trajectory.back() - xb).norm());
  }
  const double wall = seconds_since(t0);
  Verdict v;
  v.require(failures == 0, std::to_string(failures) + " solver failures");
  v.require(worst_cost <= 0.02, "max relative cost gap " + fmt("%.3g", worst_cost));
  v.require(worst_residual <= 1e-4, "max full-state residual " + fmt("%.2g", worst_residual));
  v.require(wall < 120.0, fmt("%.1f s", wall));
  return v;
}

Verdict dominance_and_equivalence() {
  const LinearSystem di = LinearSystem::double_integrator();
  Rng rng(202);
  int dominance_violations = 0;
  double worst_cost = 0.0;
  double worst_state = 0.0;
  for (int i = 0; i < 100; ++i) {
    const StateVec xa = random_di_state(rng);
    const PartialState goal = random_position(rng);
    const SteeringResult pff = steer_pff(di, xa, goal);
    if (!pff.success) {
      ++dominance_violations;
      continue;
    }
    double grid_min = kInf;
    for (int a = 0; a < 21; ++a) {
      for (int b = 0; b < 21; ++b) {
        StateVec xb;
        xb << goal, -2.0 + 0.2 * a, -2.0 + 0.2 * b;
        grid_min = std::min(grid_min, steer_full(di, xa, xb).cost);
      }
    }
    if (pff.cost > grid_min + 1e-4) ++dominance_violations;

    const SteeringResult refixed = steer_full(di, xa, pff.final_state);
    if (!refixed.success) {
      worst_cost = kInf;
      continue;
    }
    worst_cost = std::max(worst_cost, std::abs(refixed.cost - pff.cost) / pff.cost);
    for (double t : pff.trajectory.times) {
      worst_state = std::max(worst_state, (interpolate(pff.trajectory, t) - interpolate(refixed.trajectory, t)).norm());
    }
  }
  Verdict v;
  v.require(dominance_violations == 0, std::to_string(dominance_violations) + " grid dominance violations");
  v.require(worst_cost <= 1e-4, "refixed cost gap " + fmt("%.2g", worst_cost));
  v.require(worst_state <= 1e-3, "refixed state gap " + fmt("%.2g", worst_state));
  return v;
}

struct OrderingOutcome {
  Verdict verdict;
  BenchmarkReport report;
};

OrderingOutcome benchmark_ordering(const fs::path& workdir) {
  const ProblemFile file = load_problem(std::string(FMTPFF_FIXTURES) + "/di_corridor_problem.json");
  const auto backend = LinearBackend::double_integrator();
  const auto t0 = Clock::now();
  OrderingOutcome out;
  out.report = run_benchmark(file.problem, *backend, BenchmarkConfig{});
  const double wall = seconds_since(t0);

  std::map<PlannerKind, std::vector<double>> curves;
  for (const auto& b : out.report.summary) curves[b.planner].push_back(b.median_cost);
  const auto& pff = curves[PlannerKind::FmtPff];
  const auto& full = curves[PlannerKind::FmtFull];
  const auto& rrt = curves[PlannerKind::KinoRrtStar];
  int full_shared = 0;
  int full_violations = 0;
  int rrt_buckets = 0;
  int rrt_wins = 0;
  for (std::size_t i = 0; i < pff.size(); ++i) {
    if (std::isfinite(pff[i]) && std::isfinite(full[i])) {
      ++full_shared;
      if (pff[i] > full[i]) ++full_violations;
    }
    if (std::isfinite(pff[i]) || std::isfinite(rrt[i])) {
      ++rrt_buckets;
      if (pff[i] <= rrt[i]) ++rrt_wins;
    }
  }

  write_file(workdir / "benchmark.csv", [&](std::ostream& s) { write_benchmark_csv(s, out.report.runs); });
  write_file(workdir / "benchmark_events.csv", [&](std::ostream& s) { write_benchmark_events_csv(s, out.report.runs); });
  write_file(workdir / "summary.csv", [&](std::ostream& s) { write_summary_csv(s, out.report.summary); });
  std::ofstream(workdir / "benchmark.svg") << render_benchmark_svg(out.report.summary);

  const double share = rrt_buckets ? static_cast<double>(rrt_wins) / rrt_buckets : 0.0;
  out.verdict.require(full_violations == 0, "vs FMT full: " + std::to_string(full_shared - full_violations) + "/" +
                                                std::to_string(full_shared) + " shared buckets");
  out.verdict.require(rrt_buckets > 0 && share >= 0.8, "vs Kino-RRT*: " + std::to_string(rrt_wins) + "/" +
                                                           std::to_string(rrt_buckets) + " buckets");
  out.verdict.require(wall < 600.0, fmt("%.1f s", wall));
  return out;
}

struct LearnedOutcome {
  Verdict verdict;
  Verdict held_out;
  std::optional<LearnedBackend> backend;
  Mlp controller;
};

LearnedOutcome learned_steering(const fs::path& workdir) {
  const SystemModel car = SystemModel::kinematic_car();
  const StateBox box = training_box(SystemKind::KinematicCar);
  LearnedOutcome out;

  auto t0 = Clock::now();
  GenerationReport report;
  const Dataset data = generate_dataset(car, 2000, 1, box, {}, &report);
  const double gen_wall = seconds_since(t0);
  write_file(workdir / "car_dataset.csv", [&](std::ostream& s) { write_dataset_csv(s, data); });

  const TrainConfig cfg;
  const auto [train_rows, held] = split_by_trajectory(data, 0.1);
  t0 = Clock::now();
  const TrainResult controller = train_controller(train_rows, cfg);
  const TrainResult cost = train_cost(cost_to_go_samples(train_rows, car), cfg);
  const double train_wall = seconds_since(t0);
  controller.net.save((workdir / "car_controller.json").string());
  cost.net.save((workdir / "car_cost.json").string());

  t0 = Clock::now();
  const RolloutStats stats = evaluate_rollouts(car, controller.net, 1000, 2024, box);
  const double eval_wall = seconds_since(t0);

  out.verdict.require(true, "success rate " + fmt("%.3f", stats.success_rate()) + " (" +
                                std::to_string(stats.successes) + "/" + std::to_string(stats.attempts) + ")");
  out.verdict.require(stats.success_rate() >= 0.9, "rate at least 0.9");
  out.verdict.require(gen_wall < 1800.0, "generation " + fmt("%.1f s", gen_wall) + ", " +
                                             std::to_string(report.solved) + "/" + std::to_string(report.attempted) +
                                             " solved");
  out.verdict.require(train_wall < 300.0, "training " + fmt("%.1f s", train_wall));
  out.verdict.require(eval_wall < 60.0, "evaluation " + fmt("%.1f s", eval_wall));

  const HeldOutMetrics m = evaluate_held_out(car, controller.net, cost.net, held);
  out.held_out.require(m.control_median_abs_error <= 0.1,
                       "control median abs error " + fmt("%.3f", m.control_median_abs_error));
  out.held_out.require(m.cost_median_relative_error <= 0.15,
                       "cost median relative error " + fmt("%.3f", m.cost_median_relative_error));
  out.held_out.require(m.cost_at_goal <= 0.5, "cost at goal " + fmt("%.3f", m.cost_at_goal));

  out.controller = controller.net;
  out.backend.emplace(car, controller.net, cost.net);
  return out;
}

Verdict car_planning(const LearnedBackend& backend) {
  int solved = 0;
  double worst = 0.0;
  int issues = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const PlanQuery q = car_query(seed);
    const PlanResult r = plan_fmt_pff(q, backend);
    issues += static_cast<int>(check_tree(r.tree, &q.env).size());
    if (!r.solved) continue;
    ++solved;
    worst = std::max(worst, max_state_deviation(resimulate(backend.system(), r.solution), r.solution));
  }
  Verdict v;
  v.require(solved >= 8, std::to_string(solved) + "/10 solved");
  v.require(worst <= 1e-6, "max resimulation deviation " + fmt("%.2g", worst));
  v.require(issues == 0, std::to_string(issues) + " tree issues");
  return v;
}

double gradient_error(Mlp net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::VectorXd grad;
  net.loss(x, y, &grad);
  const Eigen::VectorXd p = net.parameters();
  Eigen::VectorXd fd(p.size());
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Eigen::VectorXd q = p;
    q[i] += eps;
    net.set_parameters(q);
    const double up = net.loss(x, y, nullptr);
    q[i] -= 2 * eps;
    net.set_parameters(q);
    fd[i] = (up - net.loss(x, y, nullptr)) / (2 * eps);
  }
  return (grad - fd).norm() / fd.norm();
}

Verdict invariants(const BenchmarkReport& report, const Mlp& car_controller) {
  Verdict v;

  int run_issues = 0;
  for (const auto& r : report.runs) run_issues += static_cast<int>(r.issues.size());
  v.require(run_issues == 0, std::to_string(run_issues) + " issues over " + std::to_string(report.runs.size()) +
                                 " benchmark runs");

  const auto backend = LinearBackend::double_integrator();
  int observed = 0;
  for (PlannerKind kind : {PlannerKind::FmtPff, PlannerKind::FmtFull, PlannerKind::KinoRrtStar}) {
    const PlanQuery q = corridor_query(500, 1);
    const PlanResult r = plan(kind, q, *backend, [&](const PlanSnapshot& s) {
      observed += static_cast<int>(check_tree(s.tree).size());
    });
    observed += static_cast<int>(check_tree(r.tree, &q.env).size());
    if (!std::is_sorted(r.expansion_costs.begin(), r.expansion_costs.end())) ++observed;
  }
  v.require(observed == 0, std::to_string(observed) + " per-iteration tree issues");

  Rng rng(303);
  PointIndex index(1.5);
  for (int id = 0; id < 2000; ++id) index.insert(id, PartialState(uniform(rng, 0, 20), uniform(rng, 0, 20)));
  for (int id = 0; id < 2000; id += 7) index.erase(id);
  int near_mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const PartialState c(uniform(rng, -1, 21), uniform(rng, -1, 21));
    const double r = uniform(rng, 0.0, 3.0);
    if (index.query(c, r) != index.brute_force_query(c, r)) ++near_mismatches;
  }
  v.require(near_mismatches == 0, std::to_string(near_mismatches) + "/1000 near mismatches");

  double grad = gradient_error(Mlp({1, 3, 1}, 3), Eigen::MatrixXd::Random(1, 7), Eigen::MatrixXd::Random(1, 7));
  for (int trial = 0; trial < 5; ++trial) {
    Mlp net({4, 6, 6, 2}, rng());
    Eigen::MatrixXd x(4, 9), y(2, 9);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -2, 2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = uniform(rng, -2, 2);
    grad = std::max(grad, gradient_error(net, x, y));
  }
  v.require(grad <= 1e-5, "gradient error " + fmt("%.2g", grad));

  const SystemModel car = SystemModel::kinematic_car();
  const StateVec x0(0.2, -0.4, 0.3, 1.2);
  const auto u = ControlSignal::constant(ControlVec(0.7, -0.4));
  const StateVec reference = integrate_rk4(car, x0, u, 0.001, 2.0).back();
  const double factor = (integrate_rk4(car, x0, u, 0.1, 2.0).back() - reference).norm() /
                        (integrate_rk4(car, x0, u, 0.05, 2.0).back() - reference).norm();
  v.require(factor >= 12.0 && factor <= 20.0, "RK4 factor " + fmt("%.2f", factor));

  double linear_shift = 0.0;
  double learned_shift = 0.0;
  for (int i = 0; i < 20; ++i) {
    const PartialState d(uniform(rng, -10, 10), uniform(rng, -10, 10));
    const StateVec xa = random_di_state(rng);
    const PartialState goal = random_position(rng);
    StateVec moved = xa;
    moved.head<2>() += d;
    const SteeringResult base = backend->steer(xa, goal);
    const SteeringResult shifted = backend->steer(moved, goal + d);
    linear_shift = std::max({linear_shift, std::abs(base.cost - shifted.cost) / base.cost,
                             max_state_deviation(translate(base.trajectory, d), shifted.trajectory)});

    StateVec ca(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -1.5, 1.5));
    StateVec cb = ca;
    cb.head<2>() += d;
    const SteeringResult lb = rollout_nn_steer(car, car_controller, ca, PartialState::Zero());
    const SteeringResult ls = rollout_nn_steer(car, car_controller, cb, d);
    if (lb.trajectory.size() != ls.trajectory.size()) {
      learned_shift = kInf;
      continue;
    }
    learned_shift = std::max(learned_shift, max_state_deviation(translate(lb.trajectory, d), ls.trajectory));
  }
  v.require(linear_shift <= 1e-8, "linear translation gap " + fmt("%.2g", linear_shift));
  v.require(learned_shift <= 1e-9, "learned translation gap " + fmt("%.2g", learned_shift));
  return v;
}

std::string manifest_without_wall_time(nlohmann::json j) {
  std::function<void(nlohmann::json&)> strip = [&](nlohmann::json& node) {
    if (node.is_object()) {
      node.erase("wall_time_s");
      for (auto& [key, value] : node.items()) strip(value);
    } else if (node.is_array()) {
      for (auto& value : node) strip(value);
    }
  };
  strip(j);
  return j.dump();
}

std::string plan_fingerprint(PlannerKind kind, const PlanQuery& q, const SteeringBackend& backend) {
  const PlanResult r = plan(kind, q, backend);
  std::ostringstream s;
  s << manifest_without_wall_time(plan_manifest(q, backend, r)) << '\n';
  write_trajectory_csv(s, r.solution);
  for (const auto& e : r.events) s << e.best_cost << '\n';
  return s.str();
}

Verdict determinism(const LearnedBackend& car_backend) {
  Verdict v;
  const auto di = LinearBackend::double_integrator();
  int differing = 0;
  for (PlannerKind kind : {PlannerKind::FmtPff, PlannerKind::FmtFull, PlannerKind::KinoRrtStar}) {
    const PlanQuery q = corridor_query(500, 3);
    if (plan_fingerprint(kind, q, *di) != plan_fingerprint(kind, q, *di)) ++differing;
  }
  const PlanQuery cq = car_query(4);
  if (plan_fingerprint(PlannerKind::FmtPff, cq, car_backend) != plan_fingerprint(PlannerKind::FmtPff, cq, car_backend)) {
    ++differing;
  }
  v.require(differing == 0, std::to_string(differing) + "/4 plans differ");

  const SystemModel car = SystemModel::kinematic_car();
  auto dataset_bytes = [&] {
    std::ostringstream s;
    write_dataset_csv(s, generate_dataset(car, 20, 9, training_box(SystemKind::KinematicCar)));
    return s.str();
  };
  const std::string first = dataset_bytes();
  v.require(first == dataset_bytes(), "dataset bytes");

  std::istringstream in(first);
  const Dataset small = read_dataset_csv(in);
  TrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.epochs = 10;
  auto model_bytes = [&] {
    return train_controller(small, cfg).net.to_json().dump() +
           train_cost(cost_to_go_samples(small, car), cfg).net.to_json().dump();
  };
  v.require(model_bytes() == model_bytes(), "model bytes");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FMT*PFF acceptance run"};
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Directory for generated artifacts");
  app.add_option("--only", only, "Run only these criteria (4 also feeds 5, 6 and 7)")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int c) { return selected.empty() || selected.count(c) != 0; };

  bool all_pass = true;
  auto report = [&](int criterion, const Verdict& v) {
    all_pass = all_pass && v.pass;
    std::printf("criterion %d: %s (%s)\n", criterion, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  };

  if (wanted(1)) report(1, oracle_equivalence());
  if (wanted(2)) report(2, dominance_and_equivalence());
  BenchmarkReport bench;
  if (wanted(3) || wanted(6)) {
    OrderingOutcome o = benchmark_ordering(workdir);
    if (wanted(3)) report(3, o.verdict);
    bench = std::move(o.report);
  }
  if (wanted(4) || wanted(5) || wanted(6) || wanted(7)) {
    LearnedOutcome learned = learned_steering(workdir);
    if (wanted(4)) {
      report(4, learned.verdict);
      all_pass = all_pass && learned.held_out.pass;
      std::printf("  held-out models: %s (%s)\n", learned.held_out.pass ? "PASS" : "FAIL", learned.held_out.detail.c_str());
    }
    if (wanted(5)) report(5, car_planning(*learned.backend));
    if (wanted(6)) report(6, invariants(bench, learned.controller));
    if (wanted(7)) report(7, determinism(*learned.backend));
  }
  return all_pass ? 0 : 1;
}
