#include "fmtpff/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include "fmtpff/errors.hpp"
#include "fmtpff/format.hpp"
#include "fmtpff/random.hpp"

namespace fmtpff {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

PartialState sample_position(const Env& env, Rng& rng, long long& attempts, std::size_t accepted) {
  for (;;) {
    ++attempts;
    const PartialState p(uniform(rng, env.bounds.min[0], env.bounds.max[0]),
                         uniform(rng, env.bounds.min[1], env.bounds.max[1]));
    if (point_free(env, p)) return p;
    if (static_cast<double>(attempts) >= 1e4 * static_cast<double>(accepted + 1)) {
      throw EnvironmentTooDense("sampling acceptance rate fell below 1e-4 (" + std::to_string(accepted) +
                                " accepted in " + std::to_string(attempts) + " draws)");
    }
  }
}

// Frontier ordered by (cost-to-come, id) plus a spatial index of positions.
class OpenSet {
 public:
  explicit OpenSet(double r) : index_(r) {}

  void insert(const Vertex& v) {
    order_.emplace(v.cost_to_come, v.id);
    index_.insert(v.id, position(v.x));
  }
  void erase(const Vertex& v) {
    order_.erase({v.cost_to_come, v.id});
    index_.erase(v.id);
  }
  bool empty() const { return order_.empty(); }
  int top() const { return order_.begin()->second; }
  const PointIndex& index() const { return index_; }

 private:
  std::set<std::pair<double, int>> order_;
  PointIndex index_;
};

Vertex make_root(const PlanQuery& q, const SteeringBackend& backend) {
  Vertex root;
  root.x = normalize_state(backend.system(), q.x_s);
  root.xbar = position(root.x);
  return root;
}

struct FmtTargets {
  // Steering targets by sample id; id 0 is the goal.
  std::vector<StateVec> states;
  PointIndex unvisited;
};

// Shared ordered-search loop. `full` selects full-state steering to
// targets.states[id] instead of PFF steering to its position.
PlanResult run_fmt(const PlanQuery& q, const SteeringBackend& backend, FmtTargets& targets, bool full,
                   const StateVec& goal_state, const PlanObserver& observer, Clock::time_point t0) {
  PlanResult res;
  res.planner = full ? PlannerKind::FmtFull : PlannerKind::FmtPff;
  res.samples = q.m;
  Tree& tree = res.tree;
  tree.add(make_root(q, backend));
  OpenSet open(q.r);
  open.insert(tree.vertices[0]);

  auto at_goal = [&](const StateVec& x) {
    return full ? (x - goal_state).norm() <= q.goal_tolerance
                : (position(x) - q.goal).norm() <= q.goal_tolerance;
  };

  int c = 0;
  for (;;) {
    const Vertex current = tree.vertices[static_cast<std::size_t>(c)];
    res.expansion_costs.push_back(current.cost_to_come);
    if (at_goal(current.x)) {
      res.solved = true;
      res.goal_vertex = c;
      break;
    }
    std::vector<int> open_new;
    for (int s : near_unvisited(current.x, targets.unvisited, q.r)) {
      const StateVec& target = targets.states[static_cast<std::size_t>(s)];
      const PartialState target_pos = position(target);
      int parent = -1;
      double best = kInf;
      for (int v : near_open(open.index(), target_pos, q.r)) {
        const Vertex& cand = tree.vertices[static_cast<std::size_t>(v)];
        const double seg = full ? backend.segcost_full(cand.x, target) : backend.segcost(cand.x, target_pos);
        if (cand.cost_to_come + seg < best) {
          best = cand.cost_to_come + seg;
          parent = v;
        }
      }
      if (parent < 0) continue;
      const Vertex& p = tree.vertices[static_cast<std::size_t>(parent)];
      SteeringResult sr = full ? backend.steer_full(p.x, target) : backend.steer(p.x, target_pos);
      if (!sr.success || !trajectory_free(q.env, sr.trajectory)) continue;
      Vertex v;
      v.x = sr.trajectory.back();
      v.xbar = target_pos;
      v.parent = parent;
      v.cost_to_come = p.cost_to_come + sr.trajectory.cost;
      v.edge = std::move(sr.trajectory);
      open_new.push_back(tree.add(std::move(v)));
      targets.unvisited.erase(s);
    }
    open.erase(current);
    for (int id : open_new) open.insert(tree.vertices[static_cast<std::size_t>(id)]);
    ++res.iterations;
    if (observer) observer(PlanSnapshot{tree, targets.unvisited, res.iterations});
    if (open.empty()) break;
    c = open.top();
  }

  res.wall_time_s = seconds_since(t0);
  if (res.solved) {
    res.solution = extract_solution(tree, res.goal_vertex);
    res.cost = tree.vertices[static_cast<std::size_t>(res.goal_vertex)].cost_to_come;
    res.events.push_back({res.wall_time_s, res.cost});
  }
  return res;
}

}  // namespace

std::vector<PartialState> sample_pff(const Env& env, int m, std::uint64_t seed) {
  require(m >= 1, "sample_pff: m must be at least 1");
  env.validate();
  Rng rng(seed);
  std::vector<PartialState> out;
  out.reserve(static_cast<std::size_t>(m));
  long long attempts = 0;
  while (static_cast<int>(out.size()) < m) out.push_back(sample_position(env, rng, attempts, out.size()));
  return out;
}

PointIndex::PointIndex(double cell_size) : cell_size_(cell_size) {
  require(cell_size > 0.0 && std::isfinite(cell_size), "point index: cell size must be positive and finite");
}

std::size_t PointIndex::CellHash::operator()(const Cell& c) const noexcept {
  return std::hash<long long>()(c.first * 73856093LL ^ c.second * 19349663LL);
}

PointIndex::Cell PointIndex::cell_of(const PartialState& p) const {
  return {static_cast<long long>(std::floor(p[0] / cell_size_)), static_cast<long long>(std::floor(p[1] / cell_size_))};
}

void PointIndex::insert(int id, const PartialState& p) {
  require(p.allFinite(), "point index: non-finite point");
  require(points_.emplace(id, p).second, "point index: duplicate id " + std::to_string(id));
  cells_[cell_of(p)].push_back(id);
}

void PointIndex::erase(int id) {
  auto it = points_.find(id);
  if (it == points_.end()) return;
  auto cell = cells_.find(cell_of(it->second));
  auto& bucket = cell->second;
  bucket.erase(std::find(bucket.begin(), bucket.end(), id));
  if (bucket.empty()) cells_.erase(cell);
  points_.erase(it);
}

std::vector<int> PointIndex::query(const PartialState& center, double r) const {
  std::vector<int> out;
  if (!(r >= 0.0)) return out;
  const double span = r / cell_size_;
  // Large balls: scanning every point is cheaper than visiting empty cells.
  if (span > 64.0 || (span + 1) * (span + 1) > static_cast<double>(points_.size())) {
    return brute_force_query(center, r);
  }
  const Cell lo = cell_of(center - PartialState::Constant(r));
  const Cell hi = cell_of(center + PartialState::Constant(r));
  for (long long i = lo.first; i <= hi.first; ++i) {
    for (long long j = lo.second; j <= hi.second; ++j) {
      auto it = cells_.find({i, j});
      if (it == cells_.end()) continue;
      for (int id : it->second) {
        if ((points_.at(id) - center).norm() <= r) out.push_back(id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> PointIndex::brute_force_query(const PartialState& center, double r) const {
  std::vector<int> out;
  for (const auto& [id, p] : points_) {
    if ((p - center).norm() <= r) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> PointIndex::ids() const {
  std::vector<int> out;
  out.reserve(points_.size());
  for (const auto& entry : points_) out.push_back(entry.first);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> near_unvisited(const StateVec& x_c, const PointIndex& unvisited, double r) {
  return unvisited.query(position(x_c), r);
}

std::vector<int> near_open(const PointIndex& open, const PartialState& xbar, double r) {
  return open.query(xbar, r);
}

int Tree::add(Vertex v) {
  v.id = static_cast<int>(vertices.size());
  if (v.parent >= 0) children[static_cast<std::size_t>(v.parent)].push_back(v.id);
  vertices.push_back(std::move(v));
  children.emplace_back();
  return vertices.back().id;
}

void Tree::reparent(int id, int new_parent, Trajectory edge, double new_cost) {
  require(!is_ancestor(id, new_parent), "tree: reparenting would create a cycle");
  Vertex& v = vertices[static_cast<std::size_t>(id)];
  auto& old_siblings = children[static_cast<std::size_t>(v.parent)];
  old_siblings.erase(std::find(old_siblings.begin(), old_siblings.end(), id));
  children[static_cast<std::size_t>(new_parent)].push_back(id);
  const double delta = new_cost - v.cost_to_come;
  v.parent = new_parent;
  v.edge = std::move(edge);
  v.cost_to_come = new_cost;
  std::vector<int> stack(children[static_cast<std::size_t>(id)]);
  while (!stack.empty()) {
    const int d = stack.back();
    stack.pop_back();
    vertices[static_cast<std::size_t>(d)].cost_to_come += delta;
    const auto& kids = children[static_cast<std::size_t>(d)];
    stack.insert(stack.end(), kids.begin(), kids.end());
  }
}

bool Tree::is_ancestor(int ancestor, int id) const {
  for (int v = id; v >= 0; v = vertices[static_cast<std::size_t>(v)].parent) {
    if (v == ancestor) return true;
  }
  return false;
}

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::FmtPff:
      return "fmt_pff";
    case PlannerKind::FmtFull:
      return "fmt_full";
    case PlannerKind::KinoRrtStar:
      return "kino_rrt_star";
  }
  return "unknown";
}

PlannerKind planner_kind_from_string(const std::string& name) {
  if (name == "fmt_pff") return PlannerKind::FmtPff;
  if (name == "fmt_full") return PlannerKind::FmtFull;
  if (name == "kino_rrt_star") return PlannerKind::KinoRrtStar;
  throw ContractViolation("unknown planner '" + name + "' (expected fmt_pff, fmt_full or kino_rrt_star)");
}

void PlanQuery::validate(const SteeringBackend& backend) const {
  env.validate();
  require(m >= 1, "plan: m must be at least 1");
  require(r > 0.0 && std::isfinite(r), "plan: radius must be positive");
  require(goal_tolerance >= 0.0, "plan: goal_tolerance must be non-negative");
  require(velocity_bound > 0.0, "plan: velocity_bound must be positive");
  require(goal_bias >= 0.0 && goal_bias < 1.0, "plan: goal_bias must be in [0, 1)");
  require(x_s.allFinite() && goal.allFinite(), "plan: start and goal must be finite");
  require(point_free(env, position(x_s)), "plan: start position is not collision-free");
  require(env.bounds.contains(goal), "plan: goal outside the environment bounds");
  require(r <= backend.max_radius(), "plan: radius " + format_double(r) + " exceeds the " + backend.name() +
                                         " backend limit " + format_double(backend.max_radius()));
}

PlanResult plan_fmt_pff(const PlanQuery& q, const SteeringBackend& backend, const PlanObserver& observer) {
  q.validate(backend);
  const auto t0 = Clock::now();
  FmtTargets targets{{}, PointIndex(q.r)};
  const auto samples = sample_pff(q.env, q.m, q.seed);
  targets.states.reserve(samples.size() + 1);
  auto add_target = [&](const PartialState& p) {
    StateVec x = StateVec::Zero();
    x.head<kPartialDim>() = p;
    targets.unvisited.insert(static_cast<int>(targets.states.size()), p);
    targets.states.push_back(x);
  };
  add_target(q.goal);
  for (const auto& p : samples) add_target(p);
  return run_fmt(q, backend, targets, false, targets.states[0], observer, t0);
}

PlanResult plan_fmt_full(const PlanQuery& q, const SteeringBackend& backend, const PlanObserver& observer) {
  q.validate(backend);
  if (!backend.exact()) {
    throw UnsupportedConfiguration("full-state FMT* needs exact steering; the " + backend.name() +
                                   " backend cannot provide it");
  }
  const auto t0 = Clock::now();
  FmtTargets targets{{}, PointIndex(q.r)};
  StateVec goal_state = StateVec::Zero();
  goal_state.head<kPartialDim>() = q.goal;
  targets.states.push_back(goal_state);
  targets.unvisited.insert(0, q.goal);
  const auto positions = sample_pff(q.env, q.m, q.seed);
  Rng vel_rng(derive_seed(q.seed, 1));
  for (const auto& p : positions) {
    StateVec x;
    x << p, uniform(vel_rng, -q.velocity_bound, q.velocity_bound), uniform(vel_rng, -q.velocity_bound, q.velocity_bound);
    targets.unvisited.insert(static_cast<int>(targets.states.size()), p);
    targets.states.push_back(x);
  }
  return run_fmt(q, backend, targets, true, goal_state, observer, t0);
}

PlanResult plan_kino_rrt_star(const PlanQuery& q, const SteeringBackend& backend, const PlanObserver& observer) {
  q.validate(backend);
  if (!backend.exact()) {
    throw UnsupportedConfiguration("Kino-RRT* rewiring needs exact steering; the " + backend.name() +
                                   " backend cannot provide it");
  }
  const auto t0 = Clock::now();
  PlanResult res;
  res.planner = PlannerKind::KinoRrtStar;
  Tree& tree = res.tree;
  tree.add(make_root(q, backend));
  PointIndex all(q.r);
  all.insert(0, position(tree.vertices[0].x));
  const PointIndex no_unvisited(q.r);
  Rng rng(q.seed);
  long long attempts = 0;
  std::size_t accepted = 0;
  std::vector<int> goal_candidates;
  if ((position(tree.vertices[0].x) - q.goal).norm() <= q.goal_tolerance) goal_candidates.push_back(0);
  double best = kInf;

  // Costs only fall under rewiring, so the incumbent is re-read every
  // iteration; ties go to the lowest id.
  auto update_best = [&] {
    double c_best = kInf;
    for (int g : goal_candidates) {
      const double c = tree.vertices[static_cast<std::size_t>(g)].cost_to_come;
      if (c < c_best) {
        c_best = c;
        res.goal_vertex = g;
      }
    }
    if (c_best < best - 1e-12) res.events.push_back({seconds_since(t0), c_best});
    best = std::min(best, c_best);
  };
  update_best();

  for (int it = 0; it < q.m; ++it) {
    res.iterations = it + 1;
    PartialState s = q.goal;
    if (!(uniform(rng, 0.0, 1.0) < q.goal_bias)) {
      s = sample_position(q.env, rng, attempts, accepted++);
      ++res.samples;
    }
    std::vector<int> near = all.query(s, q.r);
    if (near.empty()) {
      // Extend toward the sample from the nearest vertex, one radius at most.
      int nearest = 0;
      double d_min = kInf;
      for (const auto& v : tree.vertices) {
        const double d = (position(v.x) - s).norm();
        if (d < d_min) {
          d_min = d;
          nearest = v.id;
        }
      }
      const PartialState from = position(tree.vertices[static_cast<std::size_t>(nearest)].x);
      s = from + (s - from) * (q.r * (1.0 - 1e-9) / d_min);
      if (point_free(q.env, s)) near = all.query(s, q.r);
    }

    std::vector<std::pair<double, int>> candidates;
    for (int v : near) {
      const Vertex& cand = tree.vertices[static_cast<std::size_t>(v)];
      const double c = cand.cost_to_come + backend.segcost(cand.x, s);
      if (std::isfinite(c)) candidates.emplace_back(c, v);
    }
    std::sort(candidates.begin(), candidates.end());
    int added = -1;
    for (const auto& [c, v] : candidates) {
      const Vertex& p = tree.vertices[static_cast<std::size_t>(v)];
      SteeringResult sr = backend.steer(p.x, s);
      if (!sr.success || !trajectory_free(q.env, sr.trajectory)) continue;
      Vertex nv;
      nv.x = sr.trajectory.back();
      nv.xbar = s;
      nv.parent = v;
      nv.cost_to_come = p.cost_to_come + sr.trajectory.cost;
      nv.edge = std::move(sr.trajectory);
      added = tree.add(std::move(nv));
      all.insert(added, position(tree.vertices[static_cast<std::size_t>(added)].x));
      break;
    }

    if (added >= 0) {
      const Vertex& nv = tree.vertices[static_cast<std::size_t>(added)];
      for (int u : near) {
        if (u == nv.parent || tree.is_ancestor(u, added)) continue;
        const Vertex& target = tree.vertices[static_cast<std::size_t>(u)];
        const double through = nv.cost_to_come + backend.segcost_full(nv.x, target.x);
        if (!(through < target.cost_to_come - 1e-9)) continue;
        SteeringResult sr = backend.steer_full(nv.x, target.x);
        if (!sr.success || !trajectory_free(q.env, sr.trajectory)) continue;
        const double new_cost = nv.cost_to_come + sr.trajectory.cost;
        if (new_cost < target.cost_to_come) tree.reparent(u, added, std::move(sr.trajectory), new_cost);
      }
      if ((position(nv.x) - q.goal).norm() <= q.goal_tolerance) goal_candidates.push_back(added);
    }
    update_best();
    if (observer) observer(PlanSnapshot{tree, no_unvisited, res.iterations});
  }

  res.wall_time_s = seconds_since(t0);
  if (res.goal_vertex >= 0) {
    res.solved = true;
    res.solution = extract_solution(tree, res.goal_vertex);
    res.cost = tree.vertices[static_cast<std::size_t>(res.goal_vertex)].cost_to_come;
  }
  return res;
}

PlanResult plan(PlannerKind kind, const PlanQuery& q, const SteeringBackend& backend, const PlanObserver& observer) {
  switch (kind) {
    case PlannerKind::FmtPff:
      return plan_fmt_pff(q, backend, observer);
    case PlannerKind::FmtFull:
      return plan_fmt_full(q, backend, observer);
    case PlannerKind::KinoRrtStar:
      return plan_kino_rrt_star(q, backend, observer);
  }
  throw ContractViolation("unknown planner kind");
}

Trajectory extract_solution(const Tree& tree, int goal_vertex) {
  require(goal_vertex >= 0 && goal_vertex < static_cast<int>(tree.vertices.size()), "extract_solution: bad vertex id");
  std::vector<int> path;
  for (int v = goal_vertex; v > 0; v = tree.vertices[static_cast<std::size_t>(v)].parent) path.push_back(v);
  Trajectory out;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    append_trajectory(out, tree.vertices[static_cast<std::size_t>(*it)].edge);
  }
  return out;
}

std::vector<std::string> check_tree(const Tree& tree, const Env* env) {
  std::vector<std::string> issues;
  const auto n = tree.vertices.size();
  if (n == 0) return {"tree has no root"};
  if (tree.children.size() != n) issues.push_back("children table size mismatch");
  const Vertex& root = tree.vertices[0];
  if (root.parent != -1 || root.cost_to_come != 0.0) issues.push_back("root must have no parent and zero cost");
  for (std::size_t i = 1; i < n; ++i) {
    const Vertex& v = tree.vertices[i];
    const std::string tag = "vertex " + std::to_string(i) + ": ";
    if (v.id != static_cast<int>(i)) issues.push_back(tag + "id mismatch");
    if (v.parent < 0 || v.parent >= static_cast<int>(n)) {
      issues.push_back(tag + "invalid parent");
      continue;
    }
    // Walking up must reach the root within n steps.
    std::size_t steps = 0;
    int a = v.parent;
    while (a > 0 && steps <= n) {
      a = tree.vertices[static_cast<std::size_t>(a)].parent;
      ++steps;
    }
    if (a != 0) issues.push_back(tag + "not connected to the root (cycle or dangling parent)");
    const Vertex& p = tree.vertices[static_cast<std::size_t>(v.parent)];
    const double expected = p.cost_to_come + v.edge.cost;
    if (std::abs(v.cost_to_come - expected) > 1e-6 * (1.0 + expected)) {
      issues.push_back(tag + "cost_to_come " + format_double(v.cost_to_come) + " != parent + edge " +
                       format_double(expected));
    }
    if (v.edge.empty()) {
      issues.push_back(tag + "missing edge");
      continue;
    }
    if ((v.edge.front() - p.x).lpNorm<Eigen::Infinity>() > 1e-9) issues.push_back(tag + "edge does not start at parent");
    if ((v.edge.back() - v.x).lpNorm<Eigen::Infinity>() > 1e-3) issues.push_back(tag + "edge does not end at vertex");
    if (env && !trajectory_free(*env, v.edge)) issues.push_back(tag + "edge in collision");
    const auto& siblings = tree.children[static_cast<std::size_t>(v.parent)];
    if (std::count(siblings.begin(), siblings.end(), v.id) != 1) issues.push_back(tag + "children table out of sync");
  }
  return issues;
}

nlohmann::json plan_manifest(const PlanQuery& q, const SteeringBackend& backend, const PlanResult& result) {
  auto vec = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json settings = {{"m", q.m},
                             {"r", q.r},
                             {"goal_tolerance", q.goal_tolerance},
                             {"velocity_bound", q.velocity_bound},
                             {"goal_bias", q.goal_bias}};
  return {{"planner", to_string(result.planner)},
          {"backend", backend.name()},
          {"system", to_string(backend.system().kind)},
          {"seed", q.seed},
          {"settings", settings},
          {"x_s", vec(q.x_s)},
          {"goal", vec(q.goal)},
          {"outcome", result.outcome()},
          {"cost", result.solved ? nlohmann::json(result.cost) : nlohmann::json(nullptr)},
          {"vertices", result.tree.vertices.size()},
          {"iterations", result.iterations},
          {"samples", result.samples},
          {"solution_knots", result.solution.size()},
          {"wall_time_s", result.wall_time_s}};
}

void write_event_log_csv(std::ostream& out, const PlanResult& result) {
  out << "wall_time_s,best_cost\n";
  for (const auto& e : result.events) out << format_double(e.wall_time_s) << ',' << format_double(e.best_cost) << '\n';
}

}  // namespace fmtpff
