#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sledge/metrics.hpp"
#include "sledge/worldgen.hpp"
#include "test_util.hpp"

using namespace sledge;
using namespace sledge::testing;

namespace {

std::vector<Vec2> positions(const LaneGraph& g) {
  std::vector<Vec2> out;
  for (const auto& s : sample_points(g)) out.push_back(s.position);
  return out;
}

LaneGraph chain(double gap_y = 0.0) {
  LaneGraph g({line({-30, gap_y}, {0, gap_y}), line({0, gap_y}, {30, gap_y})});
  g.adjacency.set(0, 1);
  return g;
}

SceneState corridor(double length) { return scene_with_lanes({line({-length / 2, 0}, {length / 2, 0})}); }

}  // namespace

TEST(SamplePoints, Examples) {
  EXPECT_EQ(sample_points(LaneGraph({line({0, 0}, {15, 0})})).size(), 11u);
  EXPECT_EQ(sample_points(LaneGraph({line({0, 0}, {1, 0})})).size(), 2u);
  EXPECT_TRUE(sample_points(LaneGraph{}).empty());
  EXPECT_THROW(sample_points(LaneGraph{}, 0.0), InputError);
}

TEST(SamplePoints, SpacingAndExactEndpoint) {
  const auto l = line({2, 1}, {2 + 16.0 * std::cos(0.3), 1 + 16.0 * std::sin(0.3)});
  const auto s = sample_points(LaneGraph({l}));
  ASSERT_EQ(s.size(), 12u);  // 0, 1.5, ..., 15, then 16
  for (std::size_t k = 0; k + 1 < s.size(); ++k) EXPECT_NEAR(s[k].arc, 1.5 * static_cast<double>(k), 1e-9);
  EXPECT_EQ(s.back().position, l.end());
}

TEST(SamplePoints, SharedEndpointEmittedOnce) {
  EXPECT_EQ(sample_points(chain()).size(), 41u);
}

TEST(GeoMetrics, Identity) {
  const auto g = chain();
  const auto m = geo_metrics(g, g);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.lateral, 0.0);
  EXPECT_EQ(m.chamfer, 0.0);
}

TEST(GeoMetrics, LateralShift) {
  const LaneGraph gt({line({-20, 0}, {20, 0})});
  const LaneGraph pred({line({-20, 0.5}, {20, 0.5})});
  const auto m = geo_metrics(pred, gt);
  EXPECT_DOUBLE_EQ(m.f1, 1.0);
  EXPECT_NEAR(m.lateral, 0.5, 1e-9);
  EXPECT_NEAR(m.chamfer, 0.5, 1e-9);
}

TEST(GeoMetrics, EmptyPrediction) {
  const auto m = geo_metrics(LaneGraph{}, chain());
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(m.no_true_positives);
  EXPECT_EQ(m.lateral, 0.0);
  EXPECT_EQ(m.chamfer, MetricOptions{}.empty_chamfer_penalty);
}

TEST(GeoMetrics, LateralUsesSegmentsNotPoints) {
  // Shifted along the lane by half the spacing: point-to-point 0.75 m, point-to-segment 0.
  const LaneGraph gt({line({-20, 0}, {20, 0})});
  const LaneGraph pred({line({-19.25, 0}, {19.25, 0})});
  EXPECT_NEAR(geo_metrics(pred, gt).lateral, 0.0, 1e-12);
}

TEST(GeoMetrics, F1MatchesAssignmentOracles) {
  std::mt19937_64 rng(11);
  int cases = 0;
  while (cases < 200) {
    auto [pred, gt] = oracle::random_pair(rng, 2.0);
    const auto p = positions(pred), g = positions(gt);
    if (p.size() + g.size() > 50) continue;
    ++cases;
    const auto pairs = oracle::max_feasible_pairs(p, g, kMatchThreshold);
    EXPECT_DOUBLE_EQ(geo_metrics(pred, gt).f1, oracle::f1_from_pairs(pairs, p.size(), g.size()));
  }
}

TEST(MatchPoints, MatchesExhaustiveSearchOnTinySets) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Vec2> p(std::uniform_int_distribution<int>(0, 6)(rng)), g(std::uniform_int_distribution<int>(0, 6)(rng));
    for (auto& v : p) v = {u(rng), u(rng)};
    for (auto& v : g) v = {u(rng), u(rng)};
    const auto match = match_points(p, g, kMatchThreshold);
    std::size_t pairs = 0;
    double cost = 0.0;
    std::vector<char> used(g.size(), 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (match[i] < 0) continue;
      const auto j = static_cast<std::size_t>(match[i]);
      ASSERT_FALSE(used[j]);
      used[j] = 1;
      ASSERT_LE(distance(p[i], g[j]), kMatchThreshold);
      ++pairs;
      cost += distance(p[i], g[j]);
    }
    const auto best = oracle::exhaustive_assignment(p, g, kMatchThreshold);
    EXPECT_EQ(pairs, best.first);
    EXPECT_NEAR(cost, best.second, 1e-9);
  }
}

TEST(Chamfer, Symmetric) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    auto [a, b] = oracle::random_pair(rng, 3.0);
    const auto pa = positions(a), pb = positions(b);
    EXPECT_DOUBLE_EQ(chamfer_distance(pa, pb, 64.0), chamfer_distance(pb, pa, 64.0));
  }
}

TEST(TopoMetrics, Identity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.layout = static_cast<Layout>(seed % 4);
    const auto g = generate_scene(cfg).graph;
    const auto m = topo_metrics(g, g);
    EXPECT_EQ(m.f1, 1.0);
    EXPECT_EQ(m.lateral, 0.0);
    EXPECT_EQ(m.chamfer, 0.0);
  }
}

TEST(TopoMetrics, DeletedEdgeLowersTopoOnly) {
  const auto gt = chain();
  LaneGraph pred = gt;
  pred.adjacency.set(0, 1, false);
  EXPECT_DOUBLE_EQ(geo_metrics(pred, gt).f1, 1.0);
  EXPECT_LT(topo_metrics(pred, gt).f1, geo_metrics(pred, gt).f1);
}

TEST(TopoMetrics, DeletedEdgeMatchesHandOracle) {
  // 41 gt samples: lane 0 holds 21 (arc 0..30), lane 1 the remaining 20. Seeds every 10th
  // sample: 0, 10, 20 on lane 0, 30 and 40 on lane 1.
  const auto gt = chain();
  LaneGraph pred = gt;
  pred.adjacency.set(0, 1, false);
  const auto samples = sample_points(gt);
  ASSERT_EQ(samples.size(), 41u);
  double f1 = 0.0;
  for (std::size_t k = 0; k < samples.size(); k += 10) {
    // gt forward set: rest of the seed lane plus lane 1 when the seed is on lane 0.
    std::size_t n_gt = 0, n_pred = 0;
    for (const auto& s : samples) {
      const bool same = s.lane == samples[k].lane && s.arc >= samples[k].arc - 1e-9;
      if (same || (samples[k].lane == 0 && s.lane == 1)) ++n_gt;
      if (same) ++n_pred;
    }
    f1 += 2.0 * static_cast<double>(n_pred) / static_cast<double>(n_pred + n_gt);
  }
  f1 /= 5.0;
  EXPECT_NEAR(topo_metrics(pred, gt).f1, f1, 1e-12);
}

TEST(TopoMetrics, DisconnectedPredictionInflatesChamfer) {
  // gt: a chain of short lanes; pred: the same lanes with no edges.
  std::vector<Polyline> lanes;
  for (int k = 0; k < 8; ++k) lanes.push_back(line({-30.0 + 7.5 * k, 0}, {-22.5 + 7.5 * k, 0}));
  LaneGraph gt(lanes);
  for (std::size_t k = 0; k + 1 < lanes.size(); ++k) gt.adjacency.set(k, k + 1);
  const LaneGraph pred(lanes);
  const auto geo = geo_metrics(pred, gt);
  const auto topo = topo_metrics(pred, gt);
  EXPECT_EQ(geo.chamfer, 0.0);
  EXPECT_GT(topo.chamfer, 5.0);
}

TEST(Metrics, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(9);
  const Pose pose({4.0, -7.0}, 1.1);
  for (int t = 0; t < 30; ++t) {
    auto [pred, gt] = oracle::random_pair(rng, 1.5);
    auto move = [&](LaneGraph g) {
      for (auto& l : g.lanes)
        for (auto& q : l.points) q = pose.to_parent(q);
      return g;
    };
    const auto a = geo_metrics(pred, gt), b = geo_metrics(move(pred), move(gt));
    EXPECT_DOUBLE_EQ(a.f1, b.f1);
    EXPECT_NEAR(a.lateral, b.lateral, 1e-9);
    EXPECT_NEAR(a.chamfer, b.chamfer, 1e-9);
  }
}

TEST(Frechet, Examples) {
  const std::vector<double> a{-1.0, 0.0, 0.0, 0.0, 1.0};
  std::vector<double> b = a;
  for (auto& x : b) x += 3.0;
  // The padding gives sample std sqrt(2/4); build a set with exactly sigma 1 instead.
  const std::vector<double> unit{-1.0, 1.0, -1.0, 1.0};  // mean 0, sample std sqrt(4/3)
  EXPECT_EQ(frechet_1d(a, a), 0.0);
  EXPECT_NEAR(frechet_1d(a, b), 9.0, 1e-12);
  std::vector<double> twice = a;
  for (auto& x : twice) x *= 2.0;
  const double sa = sample_moments(a).std;
  EXPECT_NEAR(frechet_1d(a, twice), sa * sa, 1e-12);
  std::vector<double> shifted = unit;
  for (auto& x : shifted) x += 3.0;
  EXPECT_NEAR(frechet_1d(unit, shifted), 9.0, 1e-12);
  EXPECT_THROW(frechet_1d({1.0}, {1.0, 2.0}), InputError);
}

TEST(Frechet, InvariantUnderCommonShift) {
  const std::vector<double> a{1, 4, 2, 8, 5}, b{3, 3, 9, 1};
  std::vector<double> a2 = a, b2 = b;
  for (auto& x : a2) x += 17.5;
  for (auto& x : b2) x += 17.5;
  EXPECT_NEAR(frechet_1d(a, b), frechet_1d(a2, b2), 1e-9);
}

TEST(RouteLengthStats, Examples) {
  const std::vector<SceneState> same(3, corridor(64.0));
  const auto s = route_length_stats(same);
  EXPECT_NEAR(s.mean, 64.0, 1e-9);
  EXPECT_NEAR(s.std, 0.0, 1e-9);
  const auto e = route_length_stats({SceneState{}, SceneState{}});
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.empty_scenes, 2u);
  const auto m = route_length_stats({corridor(30), corridor(50), corridor(30), corridor(50)});
  EXPECT_NEAR(m.mean, 40.0, 1e-9);
  EXPECT_NEAR(m.std, 10.0, 1e-9);
  EXPECT_THROW(route_length_stats({}), InputError);
}
