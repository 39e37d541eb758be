#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fmtpff/dynamics.hpp"
#include "json.hpp"

namespace fmtpff {

struct Box2 {
  PartialState min = PartialState::Zero();
  PartialState max = PartialState::Zero();

  bool contains(const PartialState& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  double diameter() const { return (max - min).norm(); }
};

struct RectObstacle {
  PartialState min;
  PartialState max;
};

struct CircleObstacle {
  PartialState center;
  double radius = 0.0;
};

using Obstacle = std::variant<RectObstacle, CircleObstacle>;

/// Planar workspace for a point robot. Obstacles are closed sets: a point on
/// an obstacle boundary is in collision. `inflation` grows every obstacle by
/// a margin to emulate a robot footprint.
struct Env {
  Box2 bounds;
  std::vector<Obstacle> obstacles;
  double inflation = 0.0;

  void validate() const;
};

struct Problem {
  Env env;
  StateVec x_s = StateVec::Zero();
  PartialState goal = PartialState::Zero();

  void validate() const;
};

bool point_free(const Env& env, const PartialState& p);

inline constexpr double kCollisionResolution = 0.05;

/// Samples the position curve at arclength spacing <= resolution between
/// consecutive knots, plus every knot. Resolution-complete only: features
/// thinner than the resolution may be missed.
bool trajectory_free(const Env& env, const Trajectory& traj, double resolution = kCollisionResolution);

struct RandomEnvParams {
  Box2 bounds{PartialState(0.0, 0.0), PartialState(20.0, 20.0)};
  int min_obstacles = 4;
  int max_obstacles = 10;
  double min_size = 1.0;
  double max_size = 3.0;
  double clearance = 1.0;
  // Disks of radius `clearance` around these stay obstacle-free.
  std::vector<PartialState> keep_free;
  int retry_cap = 100;
};

/// Random mix of rectangles and circles. Deterministic in seed. An obstacle
/// that intrudes on a keep-free disk is redrawn up to retry_cap times, then
/// dropped.
Env random_env(std::uint64_t seed, const RandomEnvParams& params);

/// Planning problem file: {"env": path relative to the file or inline env
/// object, "system": name, "start": [4 values], "goal": [2 values]}.
struct ProblemFile {
  Problem problem;
  SystemKind system = SystemKind::DoubleIntegrator2D;
};
ProblemFile load_problem(const std::string& path);

nlohmann::json env_to_json(const Env& env);
Env env_from_json(const nlohmann::json& j);
Env load_env(const std::string& path);
void save_env(const std::string& path, const Env& env);

}  // namespace fmtpff
