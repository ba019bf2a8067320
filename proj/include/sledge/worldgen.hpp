#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/lanegraph.hpp"
#include "sledge/scene.hpp"
#include "sledge/world.hpp"

namespace sledge {

// Cuts stay this far from both ends of the lane they split, so a cut end never lands
// within the connection distance of an unrelated lane start (and vice versa).
inline constexpr double kCutClearance = 2.0;
inline constexpr double kMinPieceLength = 1.0;

// Vehicle spacing and speed caps keep every sampled state stoppable under IDM braking.
inline constexpr double kMinHeadway = 10.0;
inline constexpr double kMaxVehicleSpeed = 12.0;
inline constexpr double kMaxPedestrianSpeed = 1.5;
inline constexpr double kPlacementDecel = 4.0;
inline constexpr double kPlacementStandstill = 2.0;

// A stretch [lo, hi] (arc length) of one world lane.
struct LanePiece {
  std::size_t world_lane = 0;
  double lo = 0.0;
  double hi = 0.0;
  Polyline polyline;
};

namespace detail {

inline bool keeps_start(const LanePiece& p) { return p.lo == 0.0; }
inline bool keeps_end(const LanePiece& p, const World& w) { return p.hi == w.lanes[p.world_lane].length(); }

// Arc-length intervals of a world lane inside the square of half size `half` at `pose`.
inline std::vector<Interval> arc_intervals_in_square(const WorldLane& l, const Pose& pose, double half) {
  std::vector<Interval> out;
  for (std::size_t i = 0; i + 1 < l.points.size(); ++i) {
    const auto iv = clip_segment_to_square(pose.to_child(l.points[i]), pose.to_child(l.points[i + 1]), half);
    if (!iv || !(iv->hi > iv->lo)) continue;
    const double seg = l.cum[i + 1] - l.cum[i];
    const double lo = iv->lo <= 0.0 ? l.cum[i] : l.cum[i] + seg * iv->lo;
    const double hi = iv->hi >= 1.0 ? l.cum[i + 1] : l.cum[i] + seg * iv->hi;
    if (!out.empty() && lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, hi);
    } else {
      out.push_back({lo, hi});
    }
  }
  return out;
}

inline std::vector<Vec2> extract(const WorldLane& l, double lo, double hi) {
  std::vector<Vec2> pts;
  pts.push_back(lo <= 0.0 ? l.points.front() : interpolate(l.points, l.cum, lo));
  for (std::size_t i = 1; i + 1 < l.points.size(); ++i)
    if (l.cum[i] > lo && l.cum[i] < hi) pts.push_back(l.points[i]);
  pts.push_back(hi >= l.length() ? l.points.back() : interpolate(l.points, l.cum, hi));
  return pts;
}

inline LanePiece make_piece(const World& w, std::size_t lane, double lo, double hi) {
  return {lane, lo, hi, Polyline::resampled(extract(w.lanes[lane], lo, hi))};
}

// Lanes whose bounding circle can touch the square.
inline bool may_touch(const WorldLane& l, const Pose& pose, double half) {
  const Vec2 mid = l.points[l.points.size() / 2];
  double r = 0.0;
  for (const auto& p : l.points) r = std::max(r, distance(p, mid));
  return distance(mid, pose.translation) <= r + half * std::sqrt(2.0) + 1e-6;
}

// Pieces of the world inside the field of view at `pose`, with cut ends pulled inward.
inline std::vector<LanePiece> crop_world(const World& w, const Pose& pose, double half) {
  std::vector<LanePiece> out;
  for (std::size_t i = 0; i < w.lanes.size(); ++i) {
    const auto& l = w.lanes[i];
    if (!may_touch(l, pose, half)) continue;
    const auto inside = arc_intervals_in_square(l, pose, half);
    if (l.intersection >= 0) {
      // Connectors fan out from shared points, so they are never cut.
      if (inside.size() == 1 && inside[0].lo == 0.0 && inside[0].hi == l.length()) out.push_back(make_piece(w, i, 0.0, l.length()));
      continue;
    }
    for (auto iv : inside) {
      if (iv.lo > 0.0 && iv.lo < kCutClearance) iv.lo = kCutClearance;
      if (iv.hi < l.length() && iv.hi > l.length() - kCutClearance) iv.hi = l.length() - kCutClearance;
      if ((iv.hi < l.length() && iv.hi < kCutClearance) || (iv.lo > 0.0 && iv.lo > l.length() - kCutClearance)) continue;
      if (iv.hi - iv.lo < kMinPieceLength) continue;
      out.push_back(make_piece(w, i, iv.lo, iv.hi));
    }
  }
  return out;
}

inline bool intended_edge(const World& w, const LanePiece& a, const LanePiece& b) {
  if (a.world_lane == b.world_lane) return a.hi == b.lo;
  if (!keeps_end(a, w) || !keeps_start(b)) return false;
  const auto& s = w.lanes[a.world_lane].successors;
  return std::find(s.begin(), s.end(), b.world_lane) != s.end();
}

inline Adjacency intended_adjacency(const World& w, const std::vector<LanePiece>& pieces) {
  Adjacency adj(pieces.size());
  for (std::size_t a = 0; a < pieces.size(); ++a)
    for (std::size_t b = 0; b < pieces.size(); ++b)
      if (a != b && distance(pieces[a].polyline.end(), pieces[b].polyline.start()) <= kConnectionDistance &&
          intended_edge(w, pieces[a], pieces[b]))
        adj.set(a, b);
  return adj;
}

inline std::vector<Polyline> polylines_of(const std::vector<LanePiece>& pieces) {
  std::vector<Polyline> out;
  out.reserve(pieces.size());
  for (const auto& p : pieces) out.push_back(p.polyline);
  return out;
}

// Drops pieces until geometric adjacency recovery agrees with the intended successor
// lists. Only pieces with index >= `first_removable` may be dropped.
inline void reconcile_adjacency(const World& w, std::vector<LanePiece>& pieces, std::size_t first_removable = 0) {
  for (;;) {
    const auto intended = intended_adjacency(w, pieces);
    const auto recovered = recover_adjacency(polylines_of(pieces));
    std::optional<std::size_t> drop;
    for (std::size_t a = 0; a < pieces.size() && !drop; ++a) {
      for (std::size_t b = 0; b < pieces.size() && !drop; ++b) {
        if (intended(a, b) == recovered(a, b)) continue;
        std::size_t victim = pieces[a].polyline.length() <= pieces[b].polyline.length() ? a : b;
        if (intended(a, b) == 0) {
          if (!keeps_end(pieces[a], w)) victim = a;
          else if (!keeps_start(pieces[b])) victim = b;
        }
        if (victim < first_removable) victim = victim == a ? b : a;
        if (victim < first_removable) throw InvariantError("worldgen: seam adjacency cannot be reconciled");
        drop = victim;
      }
    }
    if (!drop) return;
    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(*drop));
  }
}

inline void add_lights(const World& w, const std::vector<LanePiece>& pieces, const Pose& pose, SceneState& s) {
  for (const auto& p : pieces) {
    const auto& l = w.lanes[p.world_lane];
    if (l.intersection < 0 || w.green_axis[static_cast<std::size_t>(l.intersection)] < 0) continue;
    Polyline local = p.polyline;
    for (auto& q : local.points) q = pose.to_child(q);
    (w.green_axis[static_cast<std::size_t>(l.intersection)] == l.axis ? s.green_lights : s.red_lights).push_back(local);
  }
}

// Scene holding `pieces` (world frame) seen from `pose`, with intended adjacency.
inline SceneState assemble(const World& w, const std::vector<LanePiece>& pieces, const Pose& pose, double fov) {
  SceneState s;
  s.fov = fov;
  std::vector<Polyline> lanes;
  for (const auto& p : pieces) {
    Polyline local = p.polyline;
    for (auto& q : local.points) q = pose.to_child(q);
    lanes.push_back(local);
  }
  s.graph = LaneGraph(std::move(lanes), intended_adjacency(w, pieces));
  add_lights(w, pieces, pose, s);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Traffic

struct TrafficOptions {
  double density = 3.0;  // agents per 100 m of eligible lane
  // Lanes allowed to receive agents; empty means all.
  std::vector<bool> lane_mask;
  // When non-empty, only lanes passing within `route_radius` of this polyline are used.
  std::vector<Vec2> route;
  double route_radius = 40.0;
};

namespace detail {

struct Placement {
  std::vector<AgentBox> agents;
};

inline bool clear_of(const OrientedBox& b, const std::vector<AgentBox>& placed, const std::vector<AgentBox>& existing) {
  const OrientedBox ego{{0.0, 0.0}, 0.0, kEgoExtent.length + 2.0, kEgoExtent.width + 2.0};
  if (boxes_overlap(b, ego)) return false;
  for (const auto& a : placed)
    if (distance(a.center, b.center) <= a.box().circumradius() + b.circumradius() && boxes_overlap(a.box(), b))
      return false;
  for (const auto& a : existing)
    if (distance(a.center, b.center) <= a.box().circumradius() + b.circumradius() && boxes_overlap(a.box(), b))
      return false;
  return true;
}

inline double centerline_clearance(const LaneGraph& g, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : g.lanes) best = std::min(best, point_polyline_distance(p, l.points));
  return best;
}

// Speed at which a vehicle can still stop `gap` meters behind a standing obstacle.
inline double stoppable_speed(double gap) {
  return std::sqrt(2.0 * kPlacementDecel * std::max(0.0, gap - kPlacementStandstill));
}

inline Placement place_agents(const SceneState& scene, const std::vector<std::size_t>& lanes, double density,
                              std::uint64_t seed) {
  Placement out;
  if (density <= 0.0 || lanes.empty()) return out;
  Rng rng(seed);
  const double half = scene.fov / 2.0;
  const auto& g = scene.graph;

  // Vehicles along lane centerlines with exponential gaps beyond the minimum headway.
  const double mean_gap = std::max(100.0 / (0.7 * density), kMinHeadway + 0.5);
  struct OnLane {
    std::size_t agent;
    double arc;
  };
  std::vector<std::vector<OnLane>> per_lane(g.lanes.size());
  double total_length = 0.0;
  for (auto i : lanes) {
    const auto cum = g.lanes[i].arc();
    total_length += cum.back();
    for (double s = rng.uniform(0.0, mean_gap); s <= cum.back(); s += kMinHeadway + rng.exponential(mean_gap - kMinHeadway)) {
      AgentBox a;
      a.kind = AgentKind::vehicle;
      a.center = interpolate(g.lanes[i].points, cum, s);
      a.heading = tangent_at(g.lanes[i].points, cum, s).heading();
      a.extent = {rng.uniform(4.2, 5.2), rng.uniform(1.8, 2.1)};
      a.speed = rng.uniform(0.0, kMaxVehicleSpeed);
      if (!inside_square(a.center, half) || !clear_of(a.box(), out.agents, scene.agents)) continue;
      per_lane[i].push_back({out.agents.size(), s});
      out.agents.push_back(a);
    }
  }
  // Cap speeds so each vehicle can stop behind whatever is ahead on its lane, the first
  // vehicle on a successor lane, or the ego.
  for (auto i : lanes) {
    const auto& v = per_lane[i];
    const auto cum = g.lanes[i].arc();
    const auto ego = project_onto_polyline({0.0, 0.0}, g.lanes[i].points, cum);
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto& a = out.agents[v[k].agent];
      double gap = std::numeric_limits<double>::infinity();
      if (k + 1 < v.size()) {
        const auto& b = out.agents[v[k + 1].agent];
        gap = v[k + 1].arc - v[k].arc - 0.5 * (a.extent.length + b.extent.length);
      } else {
        for (auto j : g.adjacency.successors(i)) {
          if (per_lane[j].empty()) continue;
          const auto& b = out.agents[per_lane[j].front().agent];
          gap = std::min(gap, cum.back() - v[k].arc + per_lane[j].front().arc - 0.5 * (a.extent.length + b.extent.length));
        }
      }
      if (ego.distance < kHalfLane && ego.arc > v[k].arc)
        gap = std::min(gap, ego.arc - v[k].arc - 0.5 * (a.extent.length + kEgoExtent.length));
      a.speed = std::min(*a.speed, stoppable_speed(gap));
    }
  }

  // Pedestrians beside the road and static objects on the shoulder.
  auto roadside = [&](double offset, double min_clearance) -> std::optional<std::pair<Vec2, double>> {
    double pick = rng.uniform(0.0, total_length);
    for (auto i : lanes) {
      const auto cum = g.lanes[i].arc();
      if (pick > cum.back()) {
        pick -= cum.back();
        continue;
      }
      const Vec2 t = tangent_at(g.lanes[i].points, cum, pick);
      const Vec2 p = interpolate(g.lanes[i].points, cum, pick) + right_of(t) * offset;
      if (!inside_square(p, half) || centerline_clearance(g, p) < min_clearance) return std::nullopt;
      return std::make_pair(p, t.heading());
    }
    return std::nullopt;
  };
  const double expected = total_length / 100.0 * density;
  const int pedestrians = static_cast<int>(std::floor(0.2 * expected + rng.uniform()));
  for (int k = 0; k < pedestrians; ++k) {
    const auto spot = roadside(kHalfLane + 1.5, kHalfLane + 0.5);
    const double heading = rng.uniform(-kPi, kPi);
    const double speed = rng.uniform(0.0, kMaxPedestrianSpeed);
    if (!spot) continue;
    AgentBox a{AgentKind::pedestrian, spot->first, heading, {0.6, 0.6}, speed};
    if (clear_of(a.box(), out.agents, scene.agents)) out.agents.push_back(a);
  }
  const int statics = static_cast<int>(std::floor(0.1 * expected + rng.uniform()));
  for (int k = 0; k < statics; ++k) {
    const auto spot = roadside(kHalfLane + 1.05, kHalfLane + 0.55);
    const Extent e{rng.uniform(0.5, 4.5), rng.uniform(0.5, 1.5)};
    if (!spot) continue;
    AgentBox a{AgentKind::static_object, spot->first, spot->second, e, std::nullopt};
    if (clear_of(a.box(), out.agents, scene.agents)) out.agents.push_back(a);
  }
  return out;
}

}  // namespace detail

// Adds agents to a scene. Easy keeps the first seeded placement; hard keeps the placement
// with the most agents among k (ties go to the earliest). Existing agents are kept and
// treated as obstacles.
inline SceneState sample_traffic(const SceneState& scene, std::uint64_t seed, Difficulty difficulty, std::size_t k = 8,
                                 const TrafficOptions& opt = {}) {
  if (k == 0) throw InputError("sample_traffic: k must be >= 1");
  if (!(opt.density >= 0.0)) throw InputError("sample_traffic: density must be >= 0");
  if (scene.graph.lanes.empty()) return scene;
  std::vector<std::size_t> lanes;
  for (std::size_t i = 0; i < scene.graph.lanes.size(); ++i) {
    if (!opt.lane_mask.empty() && (i >= opt.lane_mask.size() || !opt.lane_mask[i])) continue;
    if (!opt.route.empty()) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& p : scene.graph.lanes[i].points) d = std::min(d, point_polyline_distance(p, opt.route));
      if (d > opt.route_radius) continue;
    }
    lanes.push_back(i);
  }
  const std::size_t samples = difficulty == Difficulty::easy ? 1 : k;
  detail::Placement best;
  for (std::size_t i = 0; i < samples; ++i) {
    auto p = detail::place_agents(scene, lanes, opt.density, mix_seed(seed, 100 + i));
    if (i == 0 || p.agents.size() > best.agents.size()) best = std::move(p);
  }
  SceneState out = scene;
  out.agents.insert(out.agents.end(), best.agents.begin(), best.agents.end());
  return out;
}

// ---------------------------------------------------------------------------
// Single scenes

// One field of view of the procedural world at the identity pose.
inline SceneState generate_scene(const GenConfig& cfg) {
  validate_config(cfg);
  const double half = cfg.fov / 2.0;
  const World world = build_world(cfg, half * std::sqrt(2.0) + 2.0 * kArmSegment);
  auto pieces = detail::crop_world(world, Pose{}, half);
  detail::reconcile_adjacency(world, pieces);
  SceneState s = detail::assemble(world, pieces, Pose{}, cfg.fov);
  TrafficOptions opt;
  opt.density = cfg.agent_density;
  s = sample_traffic(s, mix_seed(cfg.seed, 2), Difficulty::easy, 1, opt);
  validate_scene(s);
  return s;
}

// ---------------------------------------------------------------------------
// Route extrapolation by tiling

struct ChainOptions {
  // Stop adding tiles once the global route reaches this length (0: use every tile).
  double min_route_length = 0.0;
  Difficulty traffic = Difficulty::easy;
  std::size_t traffic_samples = 8;
};

struct Tile {
  Pose pose;  // tile frame in the world frame
  SceneState scene;
  Route route;  // selected route, tile lane indices
};

struct TileChain {
  std::vector<Tile> tiles;
  SceneState world;  // stitched lanes, lights and agents in the world (first tile) frame
  Route route;       // global route over world.graph lanes
  std::vector<std::size_t> source_lane;  // procedural lane each stitched lane was cut from
  bool truncated = false;
  std::string warning;
};

// Turns along the global route. Consecutive stitched lanes cut from the same procedural
// lane count as one lane.
inline std::size_t chain_turns(const TileChain& c) {
  std::size_t turns = 0;
  const auto& lanes = c.route.lanes;
  for (std::size_t k = 0; k < lanes.size();) {
    double change = 0.0;
    std::size_t j = k;
    while (j < lanes.size() && c.source_lane[lanes[j]] == c.source_lane[lanes[k]]) {
      change += heading_change(c.world.graph.lanes[lanes[j]]);
      ++j;
    }
    if (change > kTurnThreshold) ++turns;
    k = j;
  }
  return turns;
}

namespace detail {

struct Stitcher {
  const World& world;
  std::vector<LanePiece> pieces;
  std::vector<std::vector<Interval>> covered;  // per world lane, sorted and disjoint

  void cover(const LanePiece& p) {
    auto& c = covered[p.world_lane];
    c.push_back({p.lo, p.hi});
    std::sort(c.begin(), c.end(), [](Interval a, Interval b) { return a.lo < b.lo; });
    std::vector<Interval> merged;
    for (auto iv : c) {
      if (!merged.empty() && iv.lo <= merged.back().hi) {
        merged.back().hi = std::max(merged.back().hi, iv.hi);
      } else {
        merged.push_back(iv);
      }
    }
    c = std::move(merged);
  }

  // Uncovered world inside the square at `pose`. Cut ends that fall near a lane end or a
  // covered boundary are pushed onto it, so seams are exact and gaps are never tiny.
  std::vector<LanePiece> fresh(const Pose& pose, double half) const {
    std::vector<LanePiece> out;
    for (std::size_t i = 0; i < world.lanes.size(); ++i) {
      const auto& l = world.lanes[i];
      if (!may_touch(l, pose, half)) continue;
      const double len = l.length();
      if (l.intersection >= 0) {
        if (covered[i].empty() && !arc_intervals_in_square(l, pose, half).empty()) out.push_back(make_piece(world, i, 0.0, len));
        continue;
      }
      std::vector<Interval> parts;
      for (auto iv : arc_intervals_in_square(l, pose, half)) {
        std::vector<Interval> rest{iv};
        for (const auto& c : covered[i]) rest = subtract_interval(rest, c);
        parts.insert(parts.end(), rest.begin(), rest.end());
      }
      for (auto iv : parts) {
        double below = 0.0, above = len;
        for (const auto& c : covered[i]) {
          if (c.hi <= iv.lo) below = std::max(below, c.hi);
          if (c.lo >= iv.hi) above = std::min(above, c.lo);
        }
        const bool low_anchored = iv.lo - below < kCutClearance;
        const bool high_anchored = above - iv.hi < kCutClearance;
        if (low_anchored) iv.lo = below;
        if (high_anchored) iv.hi = above;
        if ((!high_anchored && iv.hi < kCutClearance) || (!low_anchored && iv.lo > len - kCutClearance)) continue;
        if (iv.hi - iv.lo < (low_anchored && high_anchored ? 1e-3 : kMinPieceLength)) continue;
        if (!out.empty() && out.back().world_lane == i && out.back().hi >= iv.lo) {
          out.back() = make_piece(world, i, out.back().lo, std::max(out.back().hi, iv.hi));
          continue;
        }
        out.push_back(make_piece(world, i, iv.lo, iv.hi));
      }
    }
    return out;
  }
};

inline double chain_radius(const GenConfig& cfg, std::size_t n_tiles, const ChainOptions& opt) {
  const double reach = cfg.fov / 2.0 * std::sqrt(2.0);
  double travel = reach * static_cast<double>(n_tiles);
  if (opt.min_route_length > 0.0) travel = std::min(travel, opt.min_route_length + 3.0 * reach);
  return reach + travel + 2.0 * kArmSegment;
}

}  // namespace detail

// Grows a route beyond one field of view: select a route in the current tile, move the
// pose to its end, add the newly visible part of the procedural world to the stitched
// graph and cut the next tile from it. Lanes already known keep their geometry.
inline TileChain extrapolate_route(const GenConfig& cfg, std::size_t n_tiles, Difficulty difficulty,
                                   const ChainOptions& opt = {}) {
  validate_config(cfg);
  if (n_tiles == 0) throw InputError("extrapolate_route: n_tiles must be >= 1");
  const double half = cfg.fov / 2.0;
  const World world = build_world(cfg, detail::chain_radius(cfg, n_tiles, opt));
  TrafficOptions traffic;
  traffic.density = cfg.agent_density;

  detail::Stitcher st{world, {}, std::vector<std::vector<Interval>>(world.lanes.size())};
  st.pieces = detail::crop_world(world, Pose{}, half);
  detail::reconcile_adjacency(world, st.pieces);
  for (const auto& p : st.pieces) st.cover(p);

  TileChain chain;
  SceneState first = detail::assemble(world, st.pieces, Pose{}, cfg.fov);
  first = sample_traffic(first, mix_seed(cfg.seed, 2), opt.traffic, opt.traffic == Difficulty::easy ? 1 : opt.traffic_samples,
                         traffic);
  validate_scene(first);
  chain.world = first;

  Pose pose{};
  for (std::size_t k = 0; k < n_tiles; ++k) {
    Tile tile;
    tile.pose = pose;
    std::vector<std::size_t> source;
    if (k == 0) {
      tile.scene = first;
      for (std::size_t i = 0; i < first.graph.lanes.size(); ++i) source.push_back(i);
    } else {
      SceneState view = chain.world;
      view.fov = cfg.fov;
      auto traced = transform_scene_traced(view, pose);
      tile.scene = std::move(traced.scene);
      tile.scene.ego_velocity = {};
      for (const auto& o : traced.lane_origin) source.push_back(o.source);
    }

    // The route continues on the stitched lane under the tile origin.
    std::optional<std::size_t> start;
    double start_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tile.scene.graph.lanes.size(); ++i) {
      if (k > 0 && source[i] != chain.route.lanes.back()) continue;
      const auto& l = tile.scene.graph.lanes[i];
      const auto proj = project_onto_polyline({0.0, 0.0}, l.points, l.arc());
      const double d = proj.distance + 2.0 * angle_between(tangent_at(l.points, l.arc(), proj.arc), {1.0, 0.0});
      if (d < start_dist) {
        start_dist = d;
        start = i;
      }
    }
    if (!start) {
      if (k == 0) throw InputError("extrapolate_route: no lane under the ego");
      chain.truncated = true;
      chain.warning = "route lost at tile " + std::to_string(k);
      break;
    }
    const auto& start_lane = tile.scene.graph.lanes[*start];
    tile.route = select_route(tile.scene.graph, *start, difficulty);
    tile.route.entry_offset = project_onto_polyline({0.0, 0.0}, start_lane.points, start_lane.arc()).arc;
    const auto& last = tile.scene.graph.lanes[tile.route.lanes.back()];
    const Vec2 end = last.end();

    // Lift the tile route onto stitched lanes.
    for (std::size_t j = 0; j < tile.route.lanes.size(); ++j) {
      const auto s = source[tile.route.lanes[j]];
      if (j == 0 && k > 0) continue;  // same stitched lane the previous tile ended on
      chain.route.lanes.push_back(s);
    }
    if (k == 0) chain.route.entry_offset = tile.route.entry_offset;
    const auto& world_last = chain.world.graph.lanes[chain.route.lanes.back()];
    chain.route.exit_offset = project_onto_polyline(pose.to_parent(end), world_last.points, world_last.arc()).arc;
    chain.tiles.push_back(tile);

    const bool stalled = k > 0 && end.norm() < 1.0;
    if (stalled) {
      chain.truncated = true;
      chain.warning = "dead end at tile " + std::to_string(k);
      break;
    }
    if (opt.min_route_length > 0.0 && route_length(chain.route, chain.world.graph) >= opt.min_route_length) break;
    if (k + 1 == n_tiles) break;

    pose = pose * Pose{end, last.end_direction().heading()};
    const std::size_t old = st.pieces.size();
    for (auto& p : st.fresh(pose, half)) st.pieces.push_back(std::move(p));
    detail::reconcile_adjacency(world, st.pieces, old);
    for (std::size_t i = old; i < st.pieces.size(); ++i) st.cover(st.pieces[i]);

    SceneState grown = detail::assemble(world, st.pieces, Pose{}, cfg.fov);
    grown.agents = chain.world.agents;
    grown.fov = std::numeric_limits<double>::max();
    TrafficOptions fresh_traffic = traffic;
    fresh_traffic.lane_mask.assign(st.pieces.size(), false);
    for (std::size_t i = old; i < st.pieces.size(); ++i) fresh_traffic.lane_mask[i] = true;
    grown = sample_traffic(grown, mix_seed(cfg.seed, 1000 + k), opt.traffic,
                           opt.traffic == Difficulty::easy ? 1 : opt.traffic_samples, fresh_traffic);
    chain.world = std::move(grown);
  }

  chain.source_lane.clear();
  for (const auto& p : st.pieces) chain.source_lane.push_back(p.world_lane);
  double extent = 0.0;
  for (const auto& l : chain.world.graph.lanes)
    for (const auto& q : l.points) extent = std::max({extent, std::abs(q.x), std::abs(q.y)});
  for (const auto& a : chain.world.agents) extent = std::max({extent, std::abs(a.center.x), std::abs(a.center.y)});
  chain.world.fov = 2.0 * std::ceil(extent + 1.0);
  return chain;
}

}  // namespace sledge
