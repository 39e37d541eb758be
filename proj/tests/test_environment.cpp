#include <cmath>

#include "doctest.h"
#include "fmtpff/environment.hpp"
#include "fmtpff/errors.hpp"
#include "fmtpff/random.hpp"

using namespace fmtpff;

namespace {

Env empty_env() {
  Env env;
  env.bounds = {PartialState(0, 0), PartialState(10, 10)};
  return env;
}

Trajectory segment(const PartialState& a, const PartialState& b) {
  Trajectory t;
  StateVec xa = StateVec::Zero();
  StateVec xb = StateVec::Zero();
  xa.head<2>() = a;
  xb.head<2>() = b;
  t.times = {0.0, 1.0};
  t.states = {xa, xb};
  t.controls = {ControlVec::Zero()};
  return t;
}

}  // namespace

TEST_CASE("point_free") {
  Env env = empty_env();
  CHECK(point_free(env, PartialState(5, 5)));
  CHECK_FALSE(point_free(env, PartialState(-0.1, 5)));
  env.obstacles.push_back(RectObstacle{PartialState(4, 4), PartialState(6, 6)});
  env.obstacles.push_back(CircleObstacle{PartialState(2, 8), 1.0});
  CHECK_FALSE(point_free(env, PartialState(5, 5)));
  CHECK_FALSE(point_free(env, PartialState(2, 8)));
  SUBCASE("boundary counts as collision") {
    CHECK_FALSE(point_free(env, PartialState(6, 5)));
    CHECK_FALSE(point_free(env, PartialState(4, 4)));
    CHECK_FALSE(point_free(env, PartialState(3, 8)));
    CHECK(point_free(env, PartialState(3.0001, 8)));
  }
  SUBCASE("inflation grows obstacles") {
    env.inflation = 0.5;
    CHECK_FALSE(point_free(env, PartialState(6.4, 5)));
    CHECK_FALSE(point_free(env, PartialState(3.4, 8)));
    CHECK(point_free(env, PartialState(6.6, 5)));
  }
}

TEST_CASE("adding an obstacle never frees a point") {
  Rng rng(4);
  Env env = empty_env();
  std::vector<PartialState> points;
  for (int i = 0; i < 500; ++i) points.emplace_back(uniform(rng, 0, 10), uniform(rng, 0, 10));
  for (int k = 0; k < 8; ++k) {
    std::vector<bool> before;
    for (const auto& p : points) before.push_back(point_free(env, p));
    const PartialState c(uniform(rng, 0, 10), uniform(rng, 0, 10));
    if (k % 2) {
      env.obstacles.push_back(CircleObstacle{c, uniform(rng, 0.2, 2.0)});
    } else {
      env.obstacles.push_back(RectObstacle{c, c + PartialState(uniform(rng, 0.2, 2), uniform(rng, 0.2, 2))});
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!before[i]) CHECK_FALSE(point_free(env, points[i]));
    }
  }
}

TEST_CASE("trajectory_free") {
  Env env = empty_env();
  CHECK(trajectory_free(env, segment(PartialState(1, 1), PartialState(9, 9))));
  env.obstacles.push_back(RectObstacle{PartialState(4, 4), PartialState(6, 6)});
  CHECK_FALSE(trajectory_free(env, segment(PartialState(1, 5), PartialState(9, 5))));
  CHECK(trajectory_free(env, segment(PartialState(1, 7), PartialState(9, 7))));
  // A thin wall between two knots is caught by arclength sampling.
  env.obstacles.push_back(RectObstacle{PartialState(2, 0), PartialState(2.06, 3)});
  CHECK_FALSE(trajectory_free(env, segment(PartialState(0.5, 1), PartialState(3.5, 1))));
}

TEST_CASE("grazing segments agree with a 10x finer recheck") {
  // Segments passing within ~0.05 m of a rectangle corner.
  Env env = empty_env();
  env.obstacles.push_back(RectObstacle{PartialState(4, 4), PartialState(6, 6)});
  Rng rng(99);
  int agree = 0;
  const int total = 2000;
  for (int i = 0; i < total; ++i) {
    const double offset = uniform(rng, -0.05, 0.05);
    const double angle = uniform(rng, 0.0, 2.0 * M_PI);
    const PartialState dir(std::cos(angle), std::sin(angle));
    const PartialState normal(-dir[1], dir[0]);
    const PartialState through = PartialState(6, 6) + offset * normal;
    const auto traj = segment(through - 2.0 * dir, through + 2.0 * dir);
    if (!point_free(env, position(traj.front())) || !point_free(env, position(traj.back()))) {
      ++agree;
      continue;
    }
    agree += trajectory_free(env, traj) == trajectory_free(env, traj, kCollisionResolution / 10);
  }
  MESSAGE("coarse/fine agreement: " << agree << "/" << total);
  CHECK(agree >= 0.99 * total);
}

TEST_CASE("a free trajectory has free knots") {
  Rng rng(8);
  Env env = random_env(8, {});
  for (int i = 0; i < 200; ++i) {
    Trajectory traj;
    StateVec x = StateVec::Zero();
    for (int k = 0; k < 6; ++k) {
      x.head<2>() = PartialState(uniform(rng, 0, 20), uniform(rng, 0, 20));
      traj.times.push_back(k);
      traj.states.push_back(x);
      if (k) traj.controls.push_back(ControlVec::Zero());
    }
    if (trajectory_free(env, traj)) {
      for (const auto& s : traj.states) CHECK(point_free(env, position(s)));
    }
  }
}

TEST_CASE("random_env") {
  RandomEnvParams params;
  params.keep_free = {PartialState(1, 1), PartialState(19, 19)};
  SUBCASE("zero obstacles") {
    params.min_obstacles = params.max_obstacles = 0;
    CHECK(random_env(1, params).obstacles.empty());
  }
  SUBCASE("deterministic in seed") {
    CHECK(env_to_json(random_env(5, params)) == env_to_json(random_env(5, params)));
    CHECK(env_to_json(random_env(5, params)) != env_to_json(random_env(6, params)));
  }
  SUBCASE("keep-free disks stay free over 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Env env = random_env(seed, params);
      for (const auto& p : params.keep_free) {
        for (int k = 0; k < 16; ++k) {
          const double a = k * M_PI / 8;
          CHECK(point_free(env, p + 0.99 * params.clearance * PartialState(std::cos(a), std::sin(a))));
        }
      }
    }
  }
}

TEST_CASE("env json round trip and fixtures") {
  RandomEnvParams params;
  Env env = random_env(12, params);
  env.inflation = 0.25;
  const Env back = env_from_json(env_to_json(env));
  CHECK(env_to_json(back) == env_to_json(env));
  for (const char* name : {"/di_corridor.json", "/car_blocks.json"}) {
    const Env fixture = load_env(std::string(FMTPFF_FIXTURES) + name);
    CHECK_FALSE(fixture.obstacles.empty());
  }
  CHECK_THROWS_AS(env_from_json(nlohmann::json::parse(R"({"bounds":{"min":[0,0],"max":[0,1]}})")), ContractViolation);
  CHECK_THROWS_AS(
      env_from_json(nlohmann::json::parse(R"({"bounds":{"min":[0,0],"max":[1,1]},"obstacles":[{"type":"poly"}]})")),
      ContractViolation);
}
