#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmtpff/backends.hpp"
#include "fmtpff/environment.hpp"
#include "json.hpp"

namespace fmtpff {

class EnvironmentTooDense : public std::runtime_error {
 public:
  explicit EnvironmentTooDense(const std::string& what) : std::runtime_error(what) {}
};

/// Uniform collision-free positions in the environment bounds by rejection.
/// Throws EnvironmentTooDense once the acceptance rate drops below 1e-4.
std::vector<PartialState> sample_pff(const Env& env, int m, std::uint64_t seed);

/// Uniform grid over the plane with cell size equal to the query radius it
/// was built for. Ball queries return ids in ascending order and agree
/// exactly with brute_force_query.
class PointIndex {
 public:
  explicit PointIndex(double cell_size);

  void insert(int id, const PartialState& p);
  void erase(int id);
  bool contains(int id) const { return points_.count(id) != 0; }
  std::size_t size() const { return points_.size(); }
  const PartialState& point(int id) const { return points_.at(id); }

  // Ids with |p - center| <= r.
  std::vector<int> query(const PartialState& center, double r) const;
  std::vector<int> brute_force_query(const PartialState& center, double r) const;
  std::vector<int> ids() const;

 private:
  using Cell = std::pair<long long, long long>;
  struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept;
  };
  Cell cell_of(const PartialState& p) const;

  double cell_size_;
  std::unordered_map<int, PartialState> points_;
  std::unordered_map<Cell, std::vector<int>, CellHash> cells_;
};

// Unvisited samples within r of the position of x_c.
std::vector<int> near_unvisited(const StateVec& x_c, const PointIndex& unvisited, double r);
// Open vertices whose position lies within r of xbar.
std::vector<int> near_open(const PointIndex& open, const PartialState& xbar, double r);

struct Vertex {
  int id = 0;
  StateVec x = StateVec::Zero();           // state actually reached
  PartialState xbar = PartialState::Zero();  // sample it was steered to
  int parent = -1;
  double cost_to_come = 0.0;
  Trajectory edge;  // from the parent; empty for the root
};

struct Tree {
  std::vector<Vertex> vertices;
  std::vector<std::vector<int>> children;

  int add(Vertex v);
  // Moves the subtree at id under new_parent, shifting descendant costs.
  void reparent(int id, int new_parent, Trajectory edge, double new_cost);
  bool is_ancestor(int ancestor, int id) const;
};

enum class PlannerKind { FmtPff, FmtFull, KinoRrtStar };
std::string to_string(PlannerKind kind);
PlannerKind planner_kind_from_string(const std::string& name);

struct PlanQuery {
  Env env;
  StateVec x_s = StateVec::Zero();
  PartialState goal = PartialState::Zero();
  int m = 1000;
  double r = 1.5;
  double goal_tolerance = 0.3;
  std::uint64_t seed = 1;
  // Full-state FMT*: velocity sampling box (per component).
  double velocity_bound = 2.0;
  // Kino-RRT*: probability of sampling the goal.
  double goal_bias = 0.05;

  void validate(const SteeringBackend& backend) const;
};

struct PlanEvent {
  double wall_time_s = 0.0;
  double best_cost = 0.0;
};

/// Tree state handed to an observer after every planner iteration.
struct PlanSnapshot {
  const Tree& tree;
  const PointIndex& unvisited;
  int iteration;
};
using PlanObserver = std::function<void(const PlanSnapshot&)>;

struct PlanResult {
  PlannerKind planner = PlannerKind::FmtPff;
  bool solved = false;
  Tree tree;
  int goal_vertex = -1;
  Trajectory solution;
  double cost = std::numeric_limits<double>::infinity();
  double wall_time_s = 0.0;
  int iterations = 0;
  int samples = 0;  // partial or full states drawn, goal excluded
  std::vector<PlanEvent> events;
  // FMT variants: cost-to-come of each vertex selected for expansion.
  std::vector<double> expansion_costs;

  std::string outcome() const { return solved ? "solved" : "failure"; }
};

/// FMT* over partial-state samples with PFF steering. Vertices keep the
/// state the steering actually reached; an edge is accepted when steering
/// reports success and the trajectory is collision-free. The search stops
/// when the expanded vertex's reached position is within goal_tolerance of
/// the goal, or fails when the open set empties.
PlanResult plan_fmt_pff(const PlanQuery& q, const SteeringBackend& backend, const PlanObserver& observer = {});

/// Kinodynamic FMT*: full-state samples (velocity uniform in
/// [-velocity_bound, velocity_bound]^2) connected by exact full-state
/// steering. The goal is the goal position at rest.
PlanResult plan_fmt_full(const PlanQuery& q, const SteeringBackend& backend, const PlanObserver& observer = {});

/// RRT* with PFF steering for parent selection and exact full-state steering
/// for rewiring; m iterations. Throws UnsupportedConfiguration for backends
/// that cannot steer exactly.
PlanResult plan_kino_rrt_star(const PlanQuery& q, const SteeringBackend& backend,
                              const PlanObserver& observer = {});

PlanResult plan(PlannerKind kind, const PlanQuery& q, const SteeringBackend& backend,
                const PlanObserver& observer = {});

/// Concatenated edges from the root to goal_vertex.
Trajectory extract_solution(const Tree& tree, int goal_vertex);

/// Structural violations of the tree (empty when consistent): acyclicity,
/// reachability, cost recursion, edge endpoints. Collision is also checked
/// when env is given.
std::vector<std::string> check_tree(const Tree& tree, const Env* env = nullptr);

nlohmann::json plan_manifest(const PlanQuery& q, const SteeringBackend& backend, const PlanResult& result);
void write_event_log_csv(std::ostream& out, const PlanResult& result);

}  // namespace fmtpff
