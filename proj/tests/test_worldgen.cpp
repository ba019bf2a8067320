#include <gtest/gtest.h>

#include "sledge/lanegraph.hpp"
#include "sledge/scene_io.hpp"
#include "sledge/worldgen.hpp"
#include "test_util.hpp"

using namespace sledge;
using namespace sledge::testing;

namespace {

GenConfig config(std::uint64_t seed, Layout layout) {
  GenConfig c;
  c.seed = seed;
  c.layout = layout;
  return c;
}

bool overlaps_any(const std::vector<AgentBox>& agents) {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (boxes_overlap(agents[i].box(), ego_box_at_origin())) return true;
    for (std::size_t j = i + 1; j < agents.size(); ++j)
      if (boxes_overlap(agents[i].box(), agents[j].box())) return true;
  }
  return false;
}

SceneState lanes_only(std::uint64_t seed, Layout layout) {
  auto c = config(seed, layout);
  c.agent_density = 0.0;
  return generate_scene(c);
}

}  // namespace

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = a.integer(2, 5);
    b.integer(2, 5);
    EXPECT_GE(k, 2);
    EXPECT_LE(k, 5);
  }
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(GenerateScene, DeterministicBytes) {
  for (int l = 0; l < 4; ++l) {
    const auto c = config(17, static_cast<Layout>(l));
    EXPECT_EQ(save_scene(generate_scene(c)), save_scene(generate_scene(c)));
  }
}

TEST(GenerateScene, StraightWithoutAgents) {
  const auto s = lanes_only(3, Layout::straight);
  EXPECT_GE(s.graph.size(), 1u);
  EXPECT_TRUE(s.agents.empty());
}

TEST(GenerateScene, IntersectionHasFork) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = generate_scene(config(seed, Layout::intersection));
    EXPECT_GE(urban_features(s.graph).density, 4u) << seed;
    bool fork = false;
    for (std::size_t i = 0; i < s.graph.size(); ++i) fork = fork || s.graph.adjacency.successors(i).size() > 1;
    EXPECT_TRUE(fork) << seed;
  }
}

TEST(GenerateScene, InvalidConfigRejected) {
  auto c = config(0, Layout::grid);
  c.min_lanes = 0;
  EXPECT_THROW(generate_scene(c), InputError);
  c = config(0, Layout::grid);
  c.agent_density = -1.0;
  EXPECT_THROW(generate_scene(c), InputError);
  c = config(0, Layout::grid);
  c.fov = 0.0;
  EXPECT_THROW(generate_scene(c), InputError);
  EXPECT_THROW(parse_layout("ring"), InputError);
}

TEST(GenerateScene, InvariantsAndAdjacencyOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(config(seed, static_cast<Layout>(seed % 4)));
    EXPECT_NO_THROW(validate_scene(s));
    EXPECT_EQ(recover_adjacency(s.graph.lanes), s.graph.adjacency) << seed;
    for (std::size_t i = 0; i < s.graph.size(); ++i)
      for (auto j : s.graph.adjacency.successors(i)) EXPECT_EQ(s.graph.lanes[i].end(), s.graph.lanes[j].start());
    EXPECT_FALSE(overlaps_any(s.agents)) << seed;
  }
}

TEST(GenerateScene, VehiclesOnCenterlinesAlignedWithLanes) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = generate_scene(config(seed, static_cast<Layout>(seed % 4)));
    for (const auto& a : s.agents) {
      if (a.kind != AgentKind::vehicle) continue;
      bool on_lane = false;
      for (const auto& l : s.graph.lanes) {
        const auto cum = l.arc();
        const auto p = project_onto_polyline(a.center, l.points, cum);
        if (p.distance < 1e-6 && angle_between(tangent_at(l.points, cum, p.arc), unit_vector(a.heading)) < 1e-6) on_lane = true;
      }
      EXPECT_TRUE(on_lane) << seed;
      ASSERT_TRUE(a.speed.has_value());
      EXPECT_GE(*a.speed, 0.0);
      EXPECT_LE(*a.speed, kMaxVehicleSpeed);
    }
  }
}

TEST(GenerateScene, LightsOnlyOnIntersectionLanes) {
  std::size_t lights = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (auto layout : {Layout::straight, Layout::curve}) EXPECT_TRUE(lanes_only(seed, layout).red_lights.empty());
    const auto s = lanes_only(seed, Layout::intersection);
    lights += s.red_lights.size() + s.green_lights.size();
    // Red and green lights never share an approach direction.
    for (const auto& r : s.red_lights)
      for (const auto& g : s.green_lights)
        if (distance(r.start(), g.start()) < 0.5) {
          EXPECT_GT(angle_between(r.start_direction(), g.start_direction()), 0.1);
        }
  }
  EXPECT_GT(lights, 0u);
}

TEST(SampleTraffic, Examples) {
  const auto s = lanes_only(5, Layout::grid);
  EXPECT_EQ(sample_traffic(s, 9, Difficulty::easy, 1), sample_traffic(s, 9, Difficulty::hard, 1));
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto e = sample_traffic(s, seed, Difficulty::easy);
    const auto h = sample_traffic(s, seed, Difficulty::hard);
    EXPECT_GE(h.agents.size(), e.agents.size());
    EXPECT_FALSE(overlaps_any(h.agents));
  }
  SceneState empty;
  EXPECT_EQ(sample_traffic(empty, 1, Difficulty::hard), empty);
  EXPECT_THROW(sample_traffic(s, 1, Difficulty::hard, 0), InputError);
}

TEST(SampleTraffic, RespectsLaneMaskAndDensity) {
  const auto s = lanes_only(8, Layout::grid);
  TrafficOptions none;
  none.density = 0.0;
  EXPECT_TRUE(sample_traffic(s, 1, Difficulty::hard, 8, none).agents.empty());
  TrafficOptions mask;
  mask.density = 20.0;
  mask.lane_mask.assign(s.graph.size(), false);
  mask.lane_mask[0] = true;
  const auto t = sample_traffic(s, 1, Difficulty::hard, 8, mask);
  for (const auto& a : t.agents)
    if (a.kind == AgentKind::vehicle) {
      EXPECT_LT(point_polyline_distance(a.center, s.graph.lanes[0].points), 1e-6);
    }
}

TEST(SampleTraffic, VehiclesCanStopBehindLeader) {
  // Dense traffic on a straight road: a follower's speed never exceeds what a 4 m/s^2
  // stop can absorb within the free gap to its leader.
  auto s = lanes_only(2, Layout::straight);
  TrafficOptions opt;
  opt.density = 12.0;
  const auto t = sample_traffic(s, 3, Difficulty::hard, 8, opt);
  for (const auto& a : t.agents) {
    if (a.kind != AgentKind::vehicle) continue;
    for (const auto& b : t.agents) {
      if (&a == &b || b.kind != AgentKind::vehicle) continue;
      const Vec2 d = b.center - a.center;
      const Vec2 dir = unit_vector(a.heading);
      if (std::abs(d.cross(dir)) > 0.5 || d.dot(dir) <= 0.0) continue;
      const double gap = d.dot(dir) - 0.5 * (a.extent.length + b.extent.length);
      EXPECT_LE(*a.speed * *a.speed, 2.0 * kPlacementDecel * std::max(0.0, gap - kPlacementStandstill) + 1e-9);
    }
  }
}

TEST(Extrapolate, SingleTileEqualsGeneratedScene) {
  for (int l = 0; l < 4; ++l) {
    const auto c = config(6, static_cast<Layout>(l));
    const auto chain = extrapolate_route(c, 1, Difficulty::easy);
    ASSERT_EQ(chain.tiles.size(), 1u);
    EXPECT_EQ(chain.tiles[0].pose, Pose{});
    EXPECT_EQ(chain.tiles[0].scene, generate_scene(c));
  }
}

TEST(Extrapolate, LongGridRoute) {
  ChainOptions opt;
  opt.min_route_length = 500.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (auto d : {Difficulty::easy, Difficulty::hard}) {
      const auto chain = extrapolate_route(config(seed, Layout::grid), 80, d, opt);
      EXPECT_FALSE(chain.truncated) << chain.warning;
      EXPECT_GE(route_length(chain.route, chain.world.graph), 500.0);
      EXPECT_TRUE(route_is_connected(chain.route, chain.world.graph));
      EXPECT_EQ(recover_adjacency(chain.world.graph.lanes), chain.world.graph.adjacency);
    }
  }
}

TEST(Extrapolate, HardChainsTurnAtLeastAsOften) {
  ChainOptions opt;
  opt.min_route_length = 300.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = config(seed, seed % 2 ? Layout::grid : Layout::intersection);
    const auto e = extrapolate_route(c, 40, Difficulty::easy, opt);
    const auto h = extrapolate_route(c, 40, Difficulty::hard, opt);
    EXPECT_GE(chain_turns(h), chain_turns(e)) << seed;
  }
}

TEST(Extrapolate, PosesFollowSelectedRoutes) {
  const auto chain = extrapolate_route(config(12, Layout::grid), 8, Difficulty::hard);
  ASSERT_GE(chain.tiles.size(), 2u);
  for (std::size_t k = 0; k + 1 < chain.tiles.size(); ++k) {
    const auto& t = chain.tiles[k];
    const auto pts = route_polyline(t.route, t.scene.graph);
    const Vec2 next = t.pose.to_child(chain.tiles[k + 1].pose.translation);
    EXPECT_NEAR(distance(next, pts.back()), 0.0, 1e-6);
    const Vec2 heading = t.pose.rotate_to_child(unit_vector(chain.tiles[k + 1].pose.rotation));
    EXPECT_LT(angle_between(heading, pts.back() - pts[pts.size() - 2]), 1e-6);
  }
}

TEST(Extrapolate, SeamsConsistentWithStitchedWorld) {
  const auto chain = extrapolate_route(config(21, Layout::grid), 8, Difficulty::hard);
  for (const auto& t : chain.tiles) {
    for (const auto& lane : t.scene.graph.lanes) {
      for (const auto& p : lane.points) {
        const Vec2 w = t.pose.to_parent(p);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& wl : chain.world.graph.lanes) best = std::min(best, point_polyline_distance(w, wl.points));
        EXPECT_LT(best, 1e-6);
      }
    }
    // Lanes present in consecutive tiles survive the round trip through the file format.
    const auto reloaded = load_scene(save_scene(t.scene));
    for (std::size_t i = 0; i < t.scene.graph.size(); ++i)
      for (std::size_t k = 0; k < kPolylinePoints; ++k)
        EXPECT_LE(distance(reloaded.graph.lanes[i].points[k], t.scene.graph.lanes[i].points[k]), 1e-6);
  }
}

TEST(Extrapolate, Deterministic) {
  const auto a = extrapolate_route(config(2, Layout::grid), 6, Difficulty::hard);
  const auto b = extrapolate_route(config(2, Layout::grid), 6, Difficulty::hard);
  EXPECT_EQ(save_scene(a.world), save_scene(b.world));
  EXPECT_EQ(a.route, b.route);
}

TEST(Extrapolate, ZeroTilesRejected) {
  EXPECT_THROW(extrapolate_route(config(0, Layout::grid), 0, Difficulty::easy), InputError);
}
