#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "idm_grid.hpp"
#include "sledge/sim.hpp"
#include "sledge/suite.hpp"
#include "sledge/worldgen.hpp"
#include "test_util.hpp"

using namespace sledge;
using namespace sledge::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Straight ego lane along y = 0 from x = -30 to 90.
SceneState ego_scene() {
  auto s = scene_with_lanes({line({-30.0, 0.0}, {90.0, 0.0})});
  s.fov = 400.0;
  return s;
}

Route lane_route(const SceneState& s, std::size_t lane = 0) {
  return {{lane}, 0.0, s.graph.lanes[lane].length()};
}

void run(SimState& s, const SimConfig& cfg, int steps, EgoAction a = {}) {
  for (int k = 0; k < steps; ++k) advance(s, a, cfg);
}

std::size_t count(const SimState& s, const std::string& kind) {
  std::size_t n = 0;
  for (const auto& e : s.events) n += e.kind == kind;
  return n;
}

}  // namespace

TEST(Idm, Equilibria) {
  const IdmParams p;
  EXPECT_LT(std::abs(idm_acceleration(p.desired_speed, 0.0, kInf, p)), 1e-9);
  EXPECT_LT(std::abs(idm_acceleration(0.0, 0.0, p.min_gap, p)), 1e-9);
  // Steady following: gap = s* / sqrt(1 - (v/v0)^delta) balances both terms.
  const double v = 6.0;
  const double gap = idm_desired_gap(v, v, p) / std::sqrt(1.0 - std::pow(v / p.desired_speed, p.exponent));
  EXPECT_NEAR(idm_acceleration(v, v, gap, p), 0.0, 1e-9);
}

TEST(Idm, LimitsAndMonotonicity) {
  const IdmParams p;
  EXPECT_DOUBLE_EQ(idm_acceleration(0.0, 0.0, kInf, p), p.max_accel);
  EXPECT_DOUBLE_EQ(idm_acceleration(5.0, 0.0, 0.0, p), -p.max_decel);
  EXPECT_DOUBLE_EQ(idm_acceleration(5.0, 0.0, -1.0, p), -p.max_decel);
  double prev = -kInf;
  for (double g = 0.5; g < 200.0; g *= 1.3) {
    const double a = idm_acceleration(8.0, 4.0, g, p);
    EXPECT_GE(a, prev);
    EXPECT_GE(a, -p.max_decel);
    EXPECT_LE(a, p.max_accel);
    prev = a;
  }
  // A faster leader never demands more braking.
  EXPECT_GE(idm_acceleration(8.0, 10.0, 20.0, p), idm_acceleration(8.0, 4.0, 20.0, p));
  EXPECT_DOUBLE_EQ(idm_desired_gap(0.0, 0.0, p), p.min_gap);
  // The dynamic term is floored at zero when the leader pulls away fast.
  EXPECT_DOUBLE_EQ(idm_desired_gap(1.0, 30.0, p), p.min_gap);
}

TEST(Idm, FollowerNeverCollidesOnGrid) {
  const auto r = idm_follow_grid({1.0, 1.25, 1.5, 2.0, 3.0}, {0.5, 1.0, 2.0, 3.0, 4.0}, {2.0, 5.0, 8.0, 11.0, 14.0});
  EXPECT_EQ(r.runs, 125u);
  EXPECT_EQ(r.collisions, 0u);
  EXPECT_GT(r.min_gap, 0.0);
}

TEST(Config, Validation) {
  SimConfig c;
  c.dt = 0.0;
  EXPECT_THROW(validate_config(c), InputError);
  c = {};
  c.idm.headway = -1.0;
  EXPECT_THROW(validate_config(c), InputError);
  c = {};
  c.light_period = 0.0;
  EXPECT_THROW(validate_config(c), InputError);
  EXPECT_NO_THROW(validate_config(SimConfig{}));
}

TEST(ProjectToLane, PicksNearestAlignedLane) {
  const LaneGraph g({line({-20, 0}, {20, 0}), line({20, 3.7}, {-20, 3.7}), line({-20, 7.4}, {20, 7.4})});
  const auto p = project_to_lane(vehicle({5.0, 3.0}, 0.0, 1.0), g);
  EXPECT_EQ(p.lane, 0u);  // lane 1 is closer but points the other way
  EXPECT_NEAR(p.lateral, 3.0, 1e-9);
  EXPECT_NEAR(p.arc, 25.0, 1e-9);
  EXPECT_EQ(project_to_lane(vehicle({5.0, 3.0}, kPi, 1.0), g).lane, 1u);
  EXPECT_EQ(project_to_lane(vehicle({5.0, 6.0}, 0.3, 1.0), g).lane, 2u);
}

TEST(ProjectToLane, Errors) {
  const LaneGraph g({line({-20, 0}, {20, 0})});
  EXPECT_THROW(project_to_lane(vehicle({0, 0}, 0.0, 1.0), LaneGraph{}), InputError);
  EXPECT_THROW(project_to_lane(vehicle({0, 6.0}, 0.0, 1.0), g), InputError);
  EXPECT_THROW(project_to_lane(vehicle({0, 0}, kPi / 2.0, 1.0), g), InputError);
  EXPECT_FALSE(try_project_to_lane({0, 0}, kPi, g).has_value());
}

TEST(Init, RejectsBadRoutes) {
  auto s = scene_with_lanes({line({-30, 0}, {0, 0}), line({0, 0}, {30, 0})});
  EXPECT_THROW(init_simulation(s, Route{{5}, 0.0, 1.0}), InputError);
  EXPECT_THROW(init_simulation(s, Route{{0, 1}, 0.0, 1.0}), InputError);
  s.graph.adjacency.set(0, 1);
  EXPECT_NO_THROW(init_simulation(s, Route{{0, 1}, 0.0, 1.0}));
}

TEST(Init, VehiclesSnapToLanesOrBecomeStatic) {
  auto s = ego_scene();
  s.agents.push_back(vehicle({20.0, 0.4}, 0.1, 3.0));
  s.agents.push_back(vehicle({20.0, 30.0}, 0.0, 3.0));
  const auto st = init_simulation(s, lane_route(s));
  EXPECT_EQ(st.agents[0].mode, AgentMode::lane_following);
  EXPECT_DOUBLE_EQ(st.agents[0].box.center.y, 0.0);
  EXPECT_NEAR(st.agents[0].box.heading, 0.0, 1e-12);
  EXPECT_EQ(st.agents[1].mode, AgentMode::fixed);
  ASSERT_EQ(count(st, "passive_static"), 1u);
  EXPECT_EQ(st.events[0].payload, "2");
}

TEST(Step, HorizonExceededThrows) {
  auto s = ego_scene();
  SimConfig cfg;
  cfg.horizon = 0.2;
  auto st = init_simulation(s, lane_route(s), cfg);
  advance(st, {}, cfg);
  advance(st, {}, cfg);
  EXPECT_THROW(advance(st, {}, cfg), InputError);
}

TEST(Step, PureStepMatchesInPlaceAdvance) {
  auto s = ego_scene();
  s.agents.push_back(vehicle({20.0, 0.0}, 0.0, 5.0));
  SimConfig cfg;
  auto a = init_simulation(s, lane_route(s), cfg);
  const auto b = step(a, {1.0, 0.05}, cfg);
  EXPECT_EQ(a.steps, 0);
  advance(a, {1.0, 0.05}, cfg);
  EXPECT_EQ(trace_csv(a.trace), trace_csv(b.trace));
}

TEST(Ego, UnicycleLimits) {
  auto s = ego_scene();
  SimConfig cfg;
  cfg.horizon = 100.0;
  auto st = init_simulation(s, lane_route(s), cfg);
  advance(st, {100.0, 1.0}, cfg);
  EXPECT_NEAR(st.ego.speed, cfg.ego.max_accel * cfg.dt, 1e-12);
  EXPECT_NEAR(st.ego.curvature, cfg.ego.max_curvature_rate * cfg.dt, 1e-12);
  run(st, cfg, 100, {100.0, 1.0});
  EXPECT_DOUBLE_EQ(st.ego.speed, cfg.ego.max_speed);
  EXPECT_DOUBLE_EQ(st.ego.curvature, cfg.ego.max_curvature);
  const double v = st.ego.speed;
  advance(st, {-100.0, 0.0}, cfg);
  EXPECT_NEAR(st.ego.speed, v - cfg.ego.max_decel * cfg.dt, 1e-12);
  run(st, cfg, 100, {-100.0, 0.0});
  EXPECT_DOUBLE_EQ(st.ego.speed, cfg.ego.min_speed);
}

TEST(Ego, StraightMotionIsExact) {
  auto s = ego_scene();
  s.ego_velocity = {10.0, 0.0};
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 20);
  EXPECT_NEAR(st.ego.position.x, 20.0, 1e-9);
  EXPECT_DOUBLE_EQ(st.ego.position.y, 0.0);
  EXPECT_TRUE(st.events.empty());
}

TEST(Events, CollisionLoggedOncePerContact) {
  auto s = ego_scene();
  s.agents.push_back({AgentKind::static_object, {12.0, 0.0}, 0.0, {1.0, 1.0}, std::nullopt});
  s.ego_velocity = {5.0, 0.0};
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 40);
  ASSERT_EQ(count(st, "collision"), 1u);
  for (const auto& e : st.events)
    if (e.kind == "collision") {
      EXPECT_EQ(e.payload, "1");
      // Front bumper reaches the box at x = 11.5 after 9.2 m.
      EXPECT_NEAR(e.t, 1.9, 1e-9);
    }
}

TEST(Events, OffRoadLoggedOnEntry) {
  auto s = ego_scene();
  s.ego_velocity = {8.0, 0.0};
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 10);
  EXPECT_EQ(count(st, "off_road"), 0u);
  // Radius 20 m: the ego leaves the lane and does not come back within 30 steps.
  run(st, cfg, 30, {0.0, 0.05});
  EXPECT_EQ(count(st, "off_road"), 1u);
  EXPECT_TRUE(st.off_road);
}

TEST(Lights, FlipExactlyEveryPeriod) {
  auto s = ego_scene();
  s.red_lights.push_back(line({-30.0, 0.0}, {-25.0, 0.0}));
  SimConfig cfg;
  cfg.horizon = 31.0;
  auto st = init_simulation(s, lane_route(s), cfg);
  ASSERT_EQ(st.lights.size(), 1u);
  EXPECT_EQ(st.lights[0].lane, std::optional<std::size_t>(0));
  run(st, cfg, 149);
  EXPECT_TRUE(st.lights[0].red);
  advance(st, {}, cfg);
  EXPECT_EQ(st.clock, 15.0);
  EXPECT_FALSE(st.lights[0].red);
  run(st, cfg, 150);
  EXPECT_TRUE(st.lights[0].red);
  std::vector<double> flips;
  for (const auto& e : st.events)
    if (e.kind == "light_flip") flips.push_back(e.t);
  EXPECT_EQ(flips, (std::vector<double>{15.0, 30.0}));
}

TEST(Lights, VehicleStopsAtRedThenProceeds) {
  auto s = ego_scene();
  s.graph = LaneGraph({line({-30, 0}, {90, 0}), line({-60, 20}, {-10, 20}), line({-10, 20}, {40, 20})});
  s.graph.adjacency.set(1, 2);
  s.red_lights.push_back(line({-10, 20}, {-5, 20}));
  s.agents.push_back(vehicle({-40.0, 20.0}, 0.0, 8.0));
  SimConfig cfg;
  cfg.horizon = 25.0;
  auto st = init_simulation(s, lane_route(s), cfg);
  ASSERT_EQ(st.lights[0].lane, std::optional<std::size_t>(2));
  double max_front = -kInf;
  while (st.clock < 15.0 - 1e-9) {
    advance(st, {}, cfg);
    max_front = std::max(max_front, st.agents[0].box.center.x + 2.25);
  }
  EXPECT_LE(max_front, -10.0);
  EXPECT_GT(max_front, -10.0 - 2.0 * cfg.idm.min_gap);
  EXPECT_LT(st.agents[0].box.speed.value_or(1.0), 0.1);
  run(st, cfg, 100);
  EXPECT_EQ(st.agents[0].lane, 2u);
}

TEST(Agents, FollowSuccessorAndContinuePastDeadEnd) {
  auto s = ego_scene();
  s.graph = LaneGraph({line({-30, 0}, {90, 0}), line({-60, 20}, {-20, 20}), line({-20, 20}, {-20, 60})});
  s.graph.adjacency.set(1, 2);
  s.agents.push_back(vehicle({-50.0, 20.0}, 0.0, 6.0));
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 150);
  EXPECT_EQ(st.agents[0].lane, 2u);
  EXPECT_GT(st.agents[0].overrun, 0.0);
  EXPECT_NEAR(st.agents[0].box.center.x, -20.0, 1e-9);
  EXPECT_GT(st.agents[0].box.center.y, 60.0);
  EXPECT_NEAR(st.agents[0].box.heading, kPi / 2.0, 1e-9);
}

TEST(Agents, PedestrianConstantVelocity) {
  auto s = ego_scene();
  s.agents.push_back({AgentKind::pedestrian, {10.0, 10.0}, -kPi / 2.0, {0.5, 0.5}, 1.5});
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 20);
  EXPECT_NEAR(st.agents[0].box.center.x, 10.0, 1e-9);
  EXPECT_NEAR(st.agents[0].box.center.y, 7.0, 1e-9);
}

TEST(Agents, FollowerStopsBehindStoppedVehicle) {
  auto s = ego_scene();
  s.graph = LaneGraph({line({-30, 0}, {90, 0}), line({-60, 20}, {80, 20})});
  s.agents.push_back(vehicle({30.0, 20.0}, 0.0, 0.0));
  s.agents.push_back({AgentKind::static_object, {33.0, 20.0}, 0.0, {1.0, 1.0}, std::nullopt});
  s.agents.push_back(vehicle({-40.0, 20.0}, 0.0, 10.0));
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 250);
  const double gap = st.agents[0].box.center.x - st.agents[2].box.center.x - 4.5;
  EXPECT_GT(gap, 0.0);
  EXPECT_LT(gap, 2.0 * cfg.idm.min_gap);
  EXPECT_DOUBLE_EQ(st.agents[0].box.center.x, 30.0);
}

TEST(Gating, FarAgentsBitwiseFrozen) {
  auto s = ego_scene();
  s.graph = LaneGraph({line({-30, 0}, {90, 0}), line({60, 5}, {160, 5})});
  s.agents.push_back(vehicle({70.0, 5.0}, 0.0, 6.0));
  s.agents.push_back({AgentKind::pedestrian, {0.0, -65.0}, 0.3, {0.5, 0.5}, 1.2});
  s.agents.push_back({AgentKind::pedestrian, {0.0, 30.0}, 0.0, {0.5, 0.5}, 0.0});
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  EXPECT_FALSE(st.agents[0].active);
  EXPECT_FALSE(st.agents[1].active);
  const auto a0 = st.agents[0].box, a1 = st.agents[1].box;
  const auto before = st.agents[0];
  run(st, cfg, 100);
  EXPECT_EQ(st.agents[0].box, a0);
  EXPECT_EQ(st.agents[1].box, a1);
  EXPECT_EQ(st.agents[0].arc, before.arc);
  EXPECT_EQ(st.agents[0].lane, before.lane);
  EXPECT_TRUE(st.agents[2].active);
  // Frozen rows in the trace repeat the same pose.
  for (const auto& r : st.trace)
    if (r.entity == 1) {
      EXPECT_EQ(r.position, a0.center);
      EXPECT_FALSE(r.active);
    }
}

TEST(Gating, AgentsReactivateWhenEgoApproaches) {
  auto s = ego_scene();
  s.graph = LaneGraph({line({-30, 0}, {90, 0}), line({60, 5}, {200, 5})});
  s.agents.push_back(vehicle({70.0, 5.0}, 0.0, 0.0));
  s.ego_velocity = {5.0, 0.0};
  SimConfig cfg;
  auto st = init_simulation(s, lane_route(s), cfg);
  EXPECT_FALSE(st.agents[0].active);
  run(st, cfg, 30);
  EXPECT_TRUE(st.agents[0].active);
  EXPECT_GT(st.agents[0].box.speed.value_or(0.0), 0.0);
}

TEST(Trace, DeterministicAndComplete) {
  GenConfig c;
  c.seed = 11;
  c.layout = Layout::grid;
  const auto scene = generate_scene(c);
  const auto found = route_from_ego(scene.graph, Difficulty::hard);
  ASSERT_TRUE(found.has_value());
  const Route route = *found;
  SimConfig cfg;
  cfg.horizon = 12.0;
  auto a = init_simulation(scene, route, cfg);
  auto b = init_simulation(scene, route, cfg);
  for (int k = 0; k < 120; ++k) {
    const EgoAction act{std::sin(0.1 * k), 0.02 * std::cos(0.05 * k)};
    advance(a, act, cfg);
    advance(b, act, cfg);
  }
  EXPECT_EQ(trace_csv(a.trace), trace_csv(b.trace));
  EXPECT_EQ(event_log(a.events), event_log(b.events));
  EXPECT_EQ(a.trace.size(), 121u * (scene.agents.size() + 1));
  const auto csv = trace_csv(a.trace);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,entity_id,kind,x,y,heading,speed,active");
}

TEST(Trace, CanBeDisabled) {
  auto s = ego_scene();
  SimConfig cfg;
  cfg.record_trace = false;
  auto st = init_simulation(s, lane_route(s), cfg);
  run(st, cfg, 10);
  EXPECT_TRUE(st.trace.empty());
  EXPECT_EQ(st.steps, 10);
}
