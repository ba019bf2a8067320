#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "sledge/assignment.hpp"
#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/lanegraph.hpp"
#include "sledge/scene.hpp"

namespace sledge {

inline constexpr double kSampleSpacing = 1.5;
inline constexpr double kMatchThreshold = 1.5;

struct PointSample {
  Vec2 position{};
  std::size_t lane = 0;
  double arc = 0.0;
};

struct MetricTriple {
  double f1 = 0.0;
  double lateral = 0.0;  // 0 with no_true_positives set when nothing matched
  double chamfer = 0.0;
  bool no_true_positives = false;
};

struct MetricOptions {
  double spacing = kSampleSpacing;
  double match_threshold = kMatchThreshold;
  // Chamfer distance charged when exactly one of the two point sets is empty.
  double empty_chamfer_penalty = kDefaultFov;
  std::size_t seed_stride = 10;
};

// Points every `spacing` meters along each lane, always including the exact endpoint.
// Lane endpoints that coincide with an already sampled endpoint are emitted once, so each
// graph node appears a single time.
inline std::vector<PointSample> sample_points(const LaneGraph& g, double spacing = kSampleSpacing) {
  if (!(spacing > 0.0)) throw InputError("sample_points: spacing must be positive");
  std::vector<PointSample> out;
  std::vector<Vec2> emitted_ends;
  auto seen = [&](Vec2 p) {
    for (const auto& q : emitted_ends)
      if (distance(p, q) <= 1e-6) return true;
    return false;
  };
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    const auto& lane = g.lanes[i];
    const auto cum = lane.arc();
    const double len = cum.back();
    if (!seen(lane.start())) {
      out.push_back({lane.start(), i, 0.0});
      emitted_ends.push_back(lane.start());
    }
    for (std::size_t k = 1;; ++k) {
      const double s = spacing * static_cast<double>(k);
      if (s >= len - 1e-9) break;
      out.push_back({interpolate(lane.points, cum, s), i, s});
    }
    if (!seen(lane.end())) {
      out.push_back({lane.end(), i, len});
      emitted_ends.push_back(lane.end());
    }
  }
  return out;
}

namespace detail {

inline std::int64_t cell_key(Vec2 p, double cell) {
  const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell));
  const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell));
  return (cx << 32) ^ (cy & 0xffffffff);
}

}  // namespace detail

// Optimal one-to-one matching of pred to gt points. Pairs farther apart than `threshold`
// are infeasible; the assignment first maximizes the number of feasible pairs and then
// minimizes their total distance. Solved exactly per connected component of the
// feasibility graph. Returns gt index per pred point, or -1.
inline std::vector<int> match_points(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt, double threshold) {
  std::vector<int> result(pred.size(), -1);
  if (pred.empty() || gt.empty()) return result;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  for (std::size_t j = 0; j < gt.size(); ++j) grid[detail::cell_key(gt[j], threshold)].push_back(j);

  const std::size_t n = pred.size(), m = gt.size();
  std::vector<std::size_t> parent(n + m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::vector<std::size_t>> near(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cx = static_cast<std::int64_t>(std::floor(pred[i].x / threshold));
    const auto cy = static_cast<std::int64_t>(std::floor(pred[i].y / threshold));
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffff));
        if (it == grid.end()) continue;
        for (auto j : it->second) {
          if (distance(pred[i], gt[j]) <= threshold) {
            near[i].push_back(j);
            const auto a = find(i), b = find(n + j);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
          }
        }
      }
    }
  }
  std::unordered_map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> comps;
  for (std::size_t i = 0; i < n; ++i)
    if (!near[i].empty()) comps[find(i)].first.push_back(i);
  for (std::size_t j = 0; j < m; ++j) {
    const auto r = find(n + j);
    if (comps.count(r)) comps[r].second.push_back(j);
  }
  const double infeasible = 1e6;
  for (auto& [root, members] : comps) {
    const auto& rows = members.first;
    const auto& cols = members.second;
    std::unordered_map<std::size_t, std::size_t> col_of;
    for (std::size_t c = 0; c < cols.size(); ++c) col_of[cols[c]] = c;
    std::vector<double> cost(rows.size() * cols.size(), infeasible);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (auto j : near[rows[r]]) cost[r * cols.size() + col_of[j]] = distance(pred[rows[r]], gt[j]);
    const auto assign = hungarian(cost, rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (assign[r] < 0) continue;
      const auto j = cols[static_cast<std::size_t>(assign[r])];
      if (distance(pred[rows[r]], gt[j]) <= threshold) result[rows[r]] = static_cast<int>(j);
    }
  }
  return result;
}

// Symmetric mean nearest-neighbor distance.
inline double chamfer_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double empty_penalty) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return empty_penalty;
  auto one_way = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).squared_norm());
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

namespace detail {

inline std::vector<Vec2> positions(const std::vector<PointSample>& s) {
  std::vector<Vec2> out;
  out.reserve(s.size());
  for (const auto& p : s) out.push_back(p.position);
  return out;
}

inline MetricTriple base_metrics(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt,
                                 const std::vector<const Polyline*>& gt_lanes, const MetricOptions& opt,
                                 const std::vector<int>* precomputed = nullptr) {
  MetricTriple t;
  if (pred.empty() && gt.empty()) {
    t.f1 = 1.0;
    return t;
  }
  const auto match = precomputed ? *precomputed : match_points(pred, gt, opt.match_threshold);
  std::size_t tp = 0;
  double lateral = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (match[i] < 0) continue;
    ++tp;
    // The matched gt point lies on a gt centerline, so it bounds the lateral offset.
    double best = distance(pred[i], gt[static_cast<std::size_t>(match[i])]);
    for (const auto* lane : gt_lanes) {
      if (best == 0.0) break;
      best = std::min(best, point_polyline_distance(pred[i], lane->points));
    }
    lateral += best;
  }
  t.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(pred.size() + gt.size());
  t.no_true_positives = tp == 0;
  t.lateral = tp ? lateral / static_cast<double>(tp) : 0.0;
  t.chamfer = chamfer_distance(pred, gt, opt.empty_chamfer_penalty);
  return t;
}

// Lanes reachable from `lane` by following successors, excluding `lane` unless on a cycle.
inline std::vector<char> reachable_lanes(const LaneGraph& g, std::size_t lane, bool& self_reachable) {
  std::vector<char> seen(g.lanes.size(), 0);
  std::vector<std::size_t> stack = g.adjacency.successors(lane);
  for (auto s : stack) seen[s] = 1;
  while (!stack.empty()) {
    const auto cur = stack.back();
    stack.pop_back();
    for (auto nx : g.adjacency.successors(cur)) {
      if (!seen[nx]) {
        seen[nx] = 1;
        stack.push_back(nx);
      }
    }
  }
  self_reachable = seen[lane] != 0;
  return seen;
}

inline std::vector<std::size_t> forward_subset(const LaneGraph& g, const std::vector<PointSample>& samples,
                                               const PointSample& seed) {
  bool cyclic = false;
  const auto reach = reachable_lanes(g, seed.lane, cyclic);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (s.lane == seed.lane ? (cyclic || s.arc >= seed.arc - 1e-9) : reach[s.lane] != 0) idx.push_back(k);
  }
  return idx;
}

}  // namespace detail

// Full-graph point-set metrics (independent of adjacency).
inline MetricTriple geo_metrics(const LaneGraph& pred, const LaneGraph& gt, const MetricOptions& opt = {}) {
  const auto ps = detail::positions(sample_points(pred, opt.spacing));
  const auto gs = detail::positions(sample_points(gt, opt.spacing));
  std::vector<const Polyline*> lanes;
  for (const auto& l : gt.lanes) lanes.push_back(&l);
  return detail::base_metrics(ps, gs, lanes, opt);
}

// Connectivity-aware metrics: for every `seed_stride`-th gt sample, compares the gt points
// reachable from the seed with the pred points reachable from the pred point matched to
// the seed, then averages over seeds.
inline MetricTriple topo_metrics(const LaneGraph& pred, const LaneGraph& gt, const MetricOptions& opt = {}) {
  const auto psamples = sample_points(pred, opt.spacing);
  const auto gsamples = sample_points(gt, opt.spacing);
  if (gsamples.empty()) {
    return detail::base_metrics(detail::positions(psamples), {}, {}, opt);
  }
  const auto ppos = detail::positions(psamples);
  const auto gpos = detail::positions(gsamples);
  const auto match = match_points(ppos, gpos, opt.match_threshold);
  std::vector<int> pred_of_gt(gsamples.size(), -1);
  for (std::size_t i = 0; i < match.size(); ++i)
    if (match[i] >= 0) pred_of_gt[static_cast<std::size_t>(match[i])] = static_cast<int>(i);

  MetricTriple acc;
  std::size_t seeds = 0, tp_seeds = 0;
  for (std::size_t k = 0; k < gsamples.size(); k += std::max<std::size_t>(opt.seed_stride, 1)) {
    const auto gidx = detail::forward_subset(gt, gsamples, gsamples[k]);
    std::vector<Vec2> gsub;
    for (auto i : gidx) gsub.push_back(gpos[i]);
    std::vector<const Polyline*> lanes;
    {
      std::vector<char> used(gt.lanes.size(), 0);
      for (auto i : gidx) used[gsamples[i].lane] = 1;
      for (std::size_t l = 0; l < gt.lanes.size(); ++l)
        if (used[l]) lanes.push_back(&gt.lanes[l]);
    }
    std::vector<Vec2> psub;
    if (pred_of_gt[k] >= 0) {
      for (auto i : detail::forward_subset(pred, psamples, psamples[static_cast<std::size_t>(pred_of_gt[k])]))
        psub.push_back(ppos[i]);
    }
    const auto t = detail::base_metrics(psub, gsub, lanes, opt);
    acc.f1 += t.f1;
    acc.chamfer += t.chamfer;
    if (!t.no_true_positives) {
      acc.lateral += t.lateral;
      ++tp_seeds;
    }
    ++seeds;
  }
  acc.f1 /= static_cast<double>(seeds);
  acc.chamfer /= static_cast<double>(seeds);
  acc.no_true_positives = tp_seeds == 0;
  acc.lateral = tp_seeds ? acc.lateral / static_cast<double>(tp_seeds) : 0.0;
  return acc;
}

// ---------------------------------------------------------------------------
// Generation metrics.

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Mean and sample (n-1) standard deviation.
inline MeanStd sample_moments(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

// Frechet distance between 1D Gaussians fitted to the two samples.
inline double frechet_1d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw InputError("frechet_1d: need at least 2 samples per set");
  const auto ma = sample_moments(a);
  const auto mb = sample_moments(b);
  return (ma.mean - mb.mean) * (ma.mean - mb.mean) + (ma.std - mb.std) * (ma.std - mb.std);
}

// Longest route (whole lanes) starting on the lane nearest the origin.
inline double longest_route_length(const LaneGraph& g) {
  const auto start = nearest_lane(g, {0.0, 0.0});
  if (!start) return 0.0;
  double best = 0.0;
  for (const auto& r : enumerate_routes(g, *start)) best = std::max(best, route_length(r, g));
  return best;
}

struct RouteLengthStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over scenes
  std::size_t empty_scenes = 0;
};

inline RouteLengthStats route_length_stats(const std::vector<SceneState>& scenes) {
  if (scenes.empty()) throw InputError("route_length_stats: empty scene set");
  RouteLengthStats st;
  std::vector<double> lengths;
  for (const auto& s : scenes) {
    if (s.graph.empty()) ++st.empty_scenes;
    lengths.push_back(longest_route_length(s.graph));
  }
  st.mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
  double ss = 0.0;
  for (double x : lengths) ss += (x - st.mean) * (x - st.mean);
  st.std = std::sqrt(ss / static_cast<double>(lengths.size()));
  return st;
}

struct FeatureFrechet {
  double connectivity = 0.0;
  double density = 0.0;
  double reach = 0.0;
  double convenience = 0.0;
};

inline FeatureFrechet urban_feature_frechet(const std::vector<SceneState>& a, const std::vector<SceneState>& b) {
  auto collect = [](const std::vector<SceneState>& scenes) {
    std::array<std::vector<double>, 4> f;
    for (const auto& s : scenes) {
      const auto u = urban_features(s.graph);
      f[0].push_back(u.connectivity);
      f[1].push_back(static_cast<double>(u.density));
      f[2].push_back(static_cast<double>(u.reach));
      f[3].push_back(u.convenience);
    }
    return f;
  };
  const auto fa = collect(a);
  const auto fb = collect(b);
  return {frechet_1d(fa[0], fb[0]), frechet_1d(fa[1], fb[1]), frechet_1d(fa[2], fb[2]), frechet_1d(fa[3], fb[3])};
}

}  // namespace sledge
