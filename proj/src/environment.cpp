#include "fmtpff/environment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fmtpff/errors.hpp"
#include "fmtpff/random.hpp"

namespace fmtpff {

namespace {

// Distance from p to the (inflated) obstacle; <= 0 means inside or on it.
double clearance_to(const Obstacle& obstacle, const PartialState& p, double inflation) {
  if (const auto* rect = std::get_if<RectObstacle>(&obstacle)) {
    const PartialState lo = rect->min.array() - inflation;
    const PartialState hi = rect->max.array() + inflation;
    const PartialState outside = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    if (outside.squaredNorm() > 0.0) return outside.norm();
    // Inside: negative depth to the nearest edge.
    return -std::min((p - lo).minCoeff(), (hi - p).minCoeff());
  }
  const auto& circle = std::get<CircleObstacle>(obstacle);
  return (p - circle.center).norm() - (circle.radius + inflation);
}

PartialState read_point(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 2, "env json: points are [x, y] arrays");
  return PartialState(j[0].get<double>(), j[1].get<double>());
}

nlohmann::json write_point(const PartialState& p) { return nlohmann::json::array({p[0], p[1]}); }

}  // namespace

void Env::validate() const {
  require(bounds.min.allFinite() && bounds.max.allFinite(), "env: bounds must be finite");
  require((bounds.min.array() < bounds.max.array()).all(), "env: bounds are empty");
  require(inflation >= 0.0, "env: inflation must be nonnegative");
  for (const auto& o : obstacles) {
    if (const auto* rect = std::get_if<RectObstacle>(&o)) {
      require(rect->min.allFinite() && rect->max.allFinite(), "env: rectangle must be finite");
      require((rect->min.array() <= rect->max.array()).all(), "env: rectangle min exceeds max");
    } else {
      const auto& c = std::get<CircleObstacle>(o);
      require(c.center.allFinite() && std::isfinite(c.radius) && c.radius >= 0.0, "env: invalid circle");
    }
  }
}

void Problem::validate() const {
  env.validate();
  require(x_s.allFinite() && goal.allFinite(), "problem: start and goal must be finite");
  require(point_free(env, position(x_s)), "problem: start is in collision or out of bounds");
  require(point_free(env, goal), "problem: goal is in collision or out of bounds");
}

bool point_free(const Env& env, const PartialState& p) {
  if (!env.bounds.contains(p)) return false;
  for (const auto& o : env.obstacles) {
    if (clearance_to(o, p, env.inflation) <= 0.0) return false;
  }
  return true;
}

bool trajectory_free(const Env& env, const Trajectory& traj, double resolution) {
  require(resolution > 0.0, "trajectory_free: resolution must be positive");
  if (traj.empty()) return true;
  if (!point_free(env, position(traj.states.front()))) return false;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const PartialState a = position(traj.states[k]);
    const PartialState b = position(traj.states[k + 1]);
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / resolution)));
    for (int i = 1; i <= pieces; ++i) {
      const double s = static_cast<double>(i) / pieces;
      if (!point_free(env, (1.0 - s) * a + s * b)) return false;
    }
  }
  return true;
}

Env random_env(std::uint64_t seed, const RandomEnvParams& params) {
  require(params.min_obstacles >= 0 && params.max_obstacles >= params.min_obstacles, "random_env: bad obstacle count range");
  require(params.min_size > 0.0 && params.max_size >= params.min_size, "random_env: bad size range");
  Rng rng(seed);
  Env env;
  env.bounds = params.bounds;
  const int count = uniform_int(rng, params.min_obstacles, params.max_obstacles);
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < params.retry_cap; ++attempt) {
      const PartialState center(uniform(rng, params.bounds.min[0], params.bounds.max[0]),
                                uniform(rng, params.bounds.min[1], params.bounds.max[1]));
      Obstacle candidate;
      if (uniform(rng, 0.0, 1.0) < 0.5) {
        const PartialState half(0.5 * uniform(rng, params.min_size, params.max_size),
                                0.5 * uniform(rng, params.min_size, params.max_size));
        candidate = RectObstacle{center - half, center + half};
      } else {
        candidate = CircleObstacle{center, 0.5 * uniform(rng, params.min_size, params.max_size)};
      }
      const bool keeps_clear = std::all_of(params.keep_free.begin(), params.keep_free.end(), [&](const PartialState& p) {
        return clearance_to(candidate, p, env.inflation) > params.clearance;
      });
      if (keeps_clear) {
        env.obstacles.push_back(candidate);
        break;
      }
    }
  }
  return env;
}

nlohmann::json env_to_json(const Env& env) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : env.obstacles) {
    if (const auto* rect = std::get_if<RectObstacle>(&o)) {
      obstacles.push_back({{"type", "rect"}, {"min", write_point(rect->min)}, {"max", write_point(rect->max)}});
    } else {
      const auto& c = std::get<CircleObstacle>(o);
      obstacles.push_back({{"type", "circle"}, {"center", write_point(c.center)}, {"radius", c.radius}});
    }
  }
  return {{"bounds", {{"min", write_point(env.bounds.min)}, {"max", write_point(env.bounds.max)}}},
          {"obstacles", obstacles},
          {"inflation", env.inflation}};
}

Env env_from_json(const nlohmann::json& j) {
  Env env;
  require(j.contains("bounds"), "env json: missing bounds");
  env.bounds.min = read_point(j.at("bounds").at("min"));
  env.bounds.max = read_point(j.at("bounds").at("max"));
  env.inflation = j.value("inflation", 0.0);
  for (const auto& o : j.value("obstacles", nlohmann::json::array())) {
    const std::string type = o.at("type").get<std::string>();
    if (type == "rect") {
      env.obstacles.emplace_back(RectObstacle{read_point(o.at("min")), read_point(o.at("max"))});
    } else if (type == "circle") {
      env.obstacles.emplace_back(CircleObstacle{read_point(o.at("center")), o.at("radius").get<double>()});
    } else {
      throw ContractViolation("env json: unknown obstacle type '" + type + "'");
    }
  }
  env.validate();
  return env;
}

Env load_env(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open env file '" + path + "'");
  return env_from_json(nlohmann::json::parse(in));
}

void save_env(const std::string& path, const Env& env) {
  std::ofstream out(path);
  require(out.good(), "cannot write env file '" + path + "'");
  out << env_to_json(env).dump(2) << '\n';
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open problem file '" + path + "'");
  const auto j = nlohmann::json::parse(in);
  ProblemFile out;
  const auto& env = j.at("env");
  if (env.is_string()) {
    const auto dir = std::filesystem::path(path).parent_path();
    out.problem.env = load_env((dir / env.get<std::string>()).string());
  } else {
    out.problem.env = env_from_json(env);
  }
  out.system = system_kind_from_string(j.at("system").get<std::string>());
  const auto start = j.at("start").get<std::vector<double>>();
  const auto goal = j.at("goal").get<std::vector<double>>();
  require(start.size() == kStateDim && goal.size() == kPartialDim, "problem file: start needs 4 values, goal 2");
  out.problem.x_s = Eigen::Map<const StateVec>(start.data());
  out.problem.goal = Eigen::Map<const PartialState>(goal.data());
  out.problem.validate();
  return out;
}

}  // namespace fmtpff
