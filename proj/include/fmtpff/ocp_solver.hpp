#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmtpff/dataset.hpp"
#include "fmtpff/dynamics.hpp"
#include "fmtpff/steering.hpp"

namespace fmtpff {

/// Free-final-time optimal control problem from x0 with the final position
/// pinned to goal. When full_goal is set the whole final state is pinned
/// instead (used as a numerical reference for fixed-final-state steering).
struct TranscriptionProblem {
  SystemModel system;
  StateVec x0 = StateVec::Zero();
  PartialState goal = PartialState::Zero();
  std::optional<StateVec> full_goal;
  int num_nodes = 40;
  double tf_lower = 0.05;
  double tf_upper = 20.0;

  void validate() const;
};

struct SolverSettings {
  std::vector<double> penalty_schedule{1e2, 1e3, 1e4, 1e5};
  int max_iterations_per_stage = 2000;
  int lbfgs_memory = 10;
  double feasibility_tolerance = 1e-3;
  double gradient_tolerance = 1e-9;
};

struct SolveReport {
  SteeringResult result;
  // Terminal residual after each penalty stage of the winning start.
  std::vector<double> stage_residuals;
  int winning_start = -1;
  int total_iterations = 0;
};

/// Direct transcription: t_f plus zero-order-hold controls on the node grid,
/// one RK4 step per interval, terminal condition as a graduated quadratic
/// penalty. Objective t_f + sum_k h u_k'Ru_k. Three starts (straight-line
/// heuristic and zero controls at two durations); the cheapest start whose
/// terminal residual is within the feasibility tolerance wins.
SolveReport solve_pff_numeric_report(const TranscriptionProblem& problem, const SolverSettings& settings = {});

SteeringResult solve_pff_numeric(const TranscriptionProblem& problem, const SolverSettings& settings = {});

struct GenerationSettings {
  int num_nodes = 40;
  double tf_lower = 0.05;
  double tf_upper = 15.0;
  SolverSettings solver;
  // 0 = one worker per hardware thread.
  unsigned workers = 0;
};

struct GenerationReport {
  int attempted = 0;
  int solved = 0;
  double success_rate() const { return attempted ? static_cast<double>(solved) / attempted : 0.0; }
};

class GenerationAborted : public std::runtime_error {
 public:
  explicit GenerationAborted(const std::string& what) : std::runtime_error(what) {}
};

/// Solves n problems from initial states drawn uniformly in box to the
/// origin (position pinned, the rest free). Each solved trajectory adds its
/// node (state, control) pairs; its first row also carries the optimal cost.
/// Instance i draws from an independent stream derived from (seed, i), so the
/// result does not depend on the worker count. Throws GenerationAborted when
/// fewer than half of the instances solve.
Dataset generate_dataset(const SystemModel& system, int n, std::uint64_t seed, const StateBox& box,
                         const GenerationSettings& settings = {}, GenerationReport* report = nullptr);

}  // namespace fmtpff
