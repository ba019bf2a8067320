#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sledge/lanegraph.hpp"
#include "sledge/worldgen.hpp"
#include "test_util.hpp"

using namespace sledge;
using namespace sledge::testing;

namespace {

double deg(double d) { return d * kPi / 180.0; }

// Lane i ends at the origin heading +x; lane j starts `gap` ahead rotated by `angle`.
std::vector<Polyline> pair_with(double gap, double angle) {
  return {line({-20, 0}, {0, 0}), ray({gap, 0}, angle, 20)};
}

LaneGraph graph_of(std::vector<Polyline> lanes) {
  auto adj = recover_adjacency(lanes);
  return LaneGraph(std::move(lanes), std::move(adj));
}

// Straight stem along +x ending at the origin, then a straight branch and a left 90 degree arc.
LaneGraph fork_graph() {
  return graph_of({line({-30, 0}, {0, 0}), line({0, 0}, {30, 0}), arc({0, 10}, 10, -kPi / 2, 0)});
}

// Oracle: reach and mean length over simple paths from in-degree-0 key points to
// out-degree-0 key points, enumerated over lanes rather than nodes.
std::pair<std::size_t, double> brute_reach(const LaneGraph& g) {
  double total = 0.0;
  std::size_t count = 0;
  auto has_pred = [&](std::size_t j) { return !g.adjacency.predecessors(j).empty(); };
  std::vector<char> used(g.size(), 0);
  auto dfs = [&](auto&& self, std::size_t lane, double len) -> void {
    const auto succ = g.adjacency.successors(lane);
    for (auto s : succ)
      if (!used[s]) {
        used[s] = 1;
        self(self, s, len + g.lanes[s].length());
        used[s] = 0;
      }
    if (succ.empty()) {
      ++count;
      total += len;
    }
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (has_pred(i)) continue;
    used[i] = 1;
    dfs(dfs, i, g.lanes[i].length());
    used[i] = 0;
  }
  return {count, count ? total / static_cast<double>(count) : 0.0};
}

}  // namespace

TEST(RecoverAdjacency, RuleExamples) {
  EXPECT_TRUE(recover_adjacency(pair_with(1.0, deg(30)))(0, 1));
  EXPECT_FALSE(recover_adjacency(pair_with(2.0, 0.0))(0, 1));
  EXPECT_FALSE(recover_adjacency(pair_with(0.5, deg(70)))(0, 1));
}

TEST(RecoverAdjacency, ThresholdBoundaries) {
  EXPECT_TRUE(recover_adjacency(pair_with(1.49, 0.0))(0, 1));
  EXPECT_FALSE(recover_adjacency(pair_with(1.51, 0.0))(0, 1));
  EXPECT_TRUE(recover_adjacency(pair_with(0.0, deg(59)))(0, 1));
  EXPECT_FALSE(recover_adjacency(pair_with(0.0, deg(61)))(0, 1));
  EXPECT_TRUE(recover_adjacency(pair_with(0.0, deg(-59)))(0, 1));
  EXPECT_FALSE(recover_adjacency(pair_with(0.0, deg(-61)))(0, 1));
}

TEST(RecoverAdjacency, IsIrreflexive) {
  // A closed loop lane whose end meets its own start.
  const auto g = graph_of({arc({0, 0}, 10, 0.0, 2 * kPi - 0.01)});
  EXPECT_FALSE(g.adjacency(0, 0));
}

TEST(RecoverAdjacency, ReproducesGeneratedSuccessors) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.layout = static_cast<Layout>(seed % 4);
    const auto s = generate_scene(cfg);
    EXPECT_EQ(recover_adjacency(s.graph.lanes), s.graph.adjacency) << seed;
  }
}

TEST(KeyPoints, IsolatedLane) {
  const auto k = key_points(graph_of({line({0, 0}, {40, 0})}));
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0].degree(), 1u);
  EXPECT_EQ(k[1].degree(), 1u);
}

TEST(KeyPoints, ChainHasOnlyEnds) {
  const auto k = key_points(graph_of({line({0, 0}, {10, 0}), line({10, 0}, {20, 0}), line({20, 0}, {30, 0})}));
  ASSERT_EQ(k.size(), 2u);
}

TEST(KeyPoints, ForkHasThreeTipsAndJunction) {
  const auto k = key_points(fork_graph());
  ASSERT_EQ(k.size(), 4u);
  std::vector<std::size_t> deg;
  for (const auto& p : k) deg.push_back(p.degree());
  std::sort(deg.begin(), deg.end());
  EXPECT_EQ(deg, (std::vector<std::size_t>{1, 1, 1, 3}));
}

TEST(EnumerateRoutes, Chain) {
  const auto g = graph_of({line({0, 0}, {10, 0}), line({10, 0}, {20, 0}), line({20, 0}, {30, 0})});
  const auto r = enumerate_routes(g, 0);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].lanes, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_NEAR(route_length(r[0], g), 30.0, 1e-9);
}

TEST(EnumerateRoutes, Fork) { EXPECT_EQ(enumerate_routes(fork_graph(), 0).size(), 2u); }

TEST(EnumerateRoutes, CycleTerminates) {
  auto g = LaneGraph({line({0, 0}, {10, 0}), line({10, 0}, {0, 0.5})});
  g.adjacency.set(0, 1);
  g.adjacency.set(1, 0);
  const auto r = enumerate_routes(g, 0);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].lanes, (std::vector<std::size_t>{0, 1}));
}

TEST(EnumerateRoutes, CapAndBadStart) {
  // Binary tree of depth 10 has 1024 leaves.
  std::vector<Polyline> lanes;
  const std::size_t n = (1u << 11) - 1;
  for (std::size_t i = 0; i < n; ++i) lanes.push_back(line({double(i), 0}, {double(i) + 1, 0}));
  LaneGraph g(lanes);
  for (std::size_t i = 0; 2 * i + 2 < n; ++i) {
    g.adjacency.set(i, 2 * i + 1);
    g.adjacency.set(i, 2 * i + 2);
  }
  EXPECT_EQ(enumerate_routes(g, 0).size(), kDefaultRouteCap);
  EXPECT_THROW(enumerate_routes(g, n), InputError);
}

TEST(CountTurns, Examples) {
  const auto straight = graph_of({line({0, 0}, {10, 0}), line({10, 0}, {20, 0}), line({20, 0}, {30, 0})});
  EXPECT_EQ(count_turns(full_route({0, 1, 2}, straight), straight), 0u);
  const auto g = fork_graph();
  EXPECT_EQ(count_turns(full_route({0, 2}, g), g), 1u);
  // U-turn from two left quarter arcs.
  const auto u = graph_of({arc({0, 10}, 10, -kPi / 2, 0), arc({0, 10}, 10, 0, kPi / 2)});
  ASSERT_TRUE(u.adjacency(0, 1));
  EXPECT_EQ(count_turns(full_route({0, 1}, u), u), 2u);
  // 40 degrees is under the threshold.
  const auto gentle = graph_of({arc({0, 10}, 10, -kPi / 2, -kPi / 2 + deg(40))});
  EXPECT_EQ(count_turns(full_route({0}, gentle), gentle), 0u);
}

TEST(SelectRoute, ForkByDifficulty) {
  const auto g = fork_graph();
  EXPECT_EQ(select_route(g, 0, Difficulty::hard).lanes, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_route(g, 0, Difficulty::easy).lanes, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectRoute, SingleRouteSameForBoth) {
  const auto g = graph_of({line({0, 0}, {10, 0}), line({10, 0}, {20, 0})});
  EXPECT_EQ(select_route(g, 0, Difficulty::hard), select_route(g, 0, Difficulty::easy));
}

TEST(SelectRoute, TieBreaksOnLengthThenIndex) {
  // Two straight branches of different length, then two of equal length.
  const auto g = graph_of({line({-10, 0}, {0, 0}), line({0, 0}, {10, 0}), line({0, 0}, {20, 0.5})});
  EXPECT_EQ(select_route(g, 0, Difficulty::easy).lanes, (std::vector<std::size_t>{0, 2}));
  const auto h = graph_of({line({-10, 0}, {0, 0}), line({0, 0}, {10, 0.5}), line({0, 0}, {10, -0.5})});
  EXPECT_EQ(select_route(h, 0, Difficulty::hard).lanes, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectRoute, HardNeverFewerTurnsThanEasy) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.layout = seed % 2 ? Layout::grid : Layout::intersection;
    const auto s = generate_scene(cfg);
    for (std::size_t i = 0; i < s.graph.size(); ++i) {
      const auto h = select_route(s.graph, i, Difficulty::hard);
      const auto e = select_route(s.graph, i, Difficulty::easy);
      EXPECT_GE(count_turns(h, s.graph), count_turns(e, s.graph));
      EXPECT_TRUE(route_is_connected(h, s.graph));
    }
  }
}

TEST(SelectRoute, NoRouteThrows) {
  EXPECT_THROW(select_route(LaneGraph{}, 0, Difficulty::easy), InputError);
}

TEST(UrbanFeatures, SingleLane) {
  const auto f = urban_features(graph_of({line({0, 0}, {40, 0})}));
  EXPECT_DOUBLE_EQ(f.connectivity, 1.0);
  EXPECT_EQ(f.density, 2u);
  EXPECT_EQ(f.reach, 1u);
  EXPECT_NEAR(f.convenience, 40.0, 1e-9);
}

TEST(UrbanFeatures, Empty) {
  const auto f = urban_features(LaneGraph{});
  EXPECT_EQ(f.connectivity, 0.0);
  EXPECT_EQ(f.density, 0u);
  EXPECT_EQ(f.reach, 0u);
  EXPECT_EQ(f.convenience, 0.0);
}

TEST(UrbanFeatures, YFork) {
  const auto g = graph_of({line({-30, 0}, {0, 0}), ray({0, 0}, deg(20), 30), ray({0, 0}, deg(-20), 30)});
  const auto f = urban_features(g);
  EXPECT_EQ(f.density, 4u);
  EXPECT_EQ(f.reach, 2u);
  EXPECT_NEAR(f.convenience, 60.0, 1e-9);
  EXPECT_DOUBLE_EQ(f.connectivity, 6.0 / 4.0);
}

TEST(UrbanFeatures, MatchesBruteForceOnGeneratedScenes) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.layout = static_cast<Layout>(seed % 4);
    const auto s = generate_scene(cfg);
    const auto f = urban_features(s.graph);
    const auto [reach, conv] = brute_reach(s.graph);
    EXPECT_EQ(f.reach, reach) << seed;
    EXPECT_NEAR(f.convenience, conv, 1e-6) << seed;
    EXPECT_LE(f.reach, f.density * (f.density > 0 ? f.density - 1 : 0));
  }
}

TEST(UrbanFeatures, InvariantUnderPermutationAndRigidMotion) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.layout = static_cast<Layout>(seed % 4);
    const auto s = generate_scene(cfg);
    const std::size_t n = s.graph.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Polyline> lanes(n);
    Adjacency adj(n);
    for (std::size_t i = 0; i < n; ++i) lanes[perm[i]] = s.graph.lanes[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (s.graph.adjacency(i, j)) adj.set(perm[i], perm[j]);
    const LaneGraph p(lanes, adj);
    const auto a = urban_features(s.graph);
    const auto b = urban_features(p);
    EXPECT_EQ(a.density, b.density);
    EXPECT_EQ(a.reach, b.reach);
    EXPECT_DOUBLE_EQ(a.connectivity, b.connectivity);
    EXPECT_NEAR(a.convenience, b.convenience, 1e-9);

    // Rigid motion of every lane (no cropping).
    const Pose pose({3.0, -2.0}, 0.9);
    std::vector<Polyline> moved = s.graph.lanes;
    for (auto& l : moved)
      for (auto& q : l.points) q = pose.to_parent(q);
    const LaneGraph m(moved, s.graph.adjacency);
    const auto c = urban_features(m);
    EXPECT_EQ(a.reach, c.reach);
    EXPECT_NEAR(a.convenience, c.convenience, 1e-9);
    double la = 0.0, lm = 0.0;
    if (n) {
      for (const auto& r : enumerate_routes(s.graph, 0)) la = std::max(la, route_length(r, s.graph));
      for (const auto& r : enumerate_routes(m, 0)) lm = std::max(lm, route_length(r, m));
    }
    EXPECT_NEAR(la, lm, 1e-9);
  }
}

TEST(NearestLane, PrefersMatchingHeading) {
  const auto g = graph_of({line({-20, -1.85}, {20, -1.85}), line({20, 1.85}, {-20, 1.85})});
  EXPECT_EQ(nearest_lane(g, {0, 0.5}, 0.0), 0u);
  EXPECT_EQ(nearest_lane(g, {0, 0.5}), 1u);
  EXPECT_FALSE(nearest_lane(LaneGraph{}, {0, 0}).has_value());
}
