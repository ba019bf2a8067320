#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/scene.hpp"

namespace sledge {

inline constexpr double kTurnThreshold = 45.0 * kPi / 180.0;
inline constexpr std::size_t kDefaultRouteCap = 256;
inline constexpr std::size_t kPathEnumerationCap = 10000;

enum class Difficulty { easy, hard };

inline std::string_view to_string(Difficulty d) { return d == Difficulty::easy ? "easy" : "hard"; }

inline Difficulty parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "hard") return Difficulty::hard;
  throw InputError("unknown difficulty '" + std::string(s) + "'");
}

struct Route {
  std::vector<std::size_t> lanes;
  double entry_offset = 0.0;  // arc offset on the first lane
  double exit_offset = 0.0;   // arc offset on the last lane

  bool operator==(const Route&) const = default;
};

inline double route_length(const Route& r, const LaneGraph& g) {
  if (r.lanes.empty()) return 0.0;
  double total = 0.0;
  for (auto i : r.lanes) total += g.lanes[i].length();
  return total - r.entry_offset - (g.lanes[r.lanes.back()].length() - r.exit_offset);
}

// Route over whole lanes.
inline Route full_route(std::vector<std::size_t> lanes, const LaneGraph& g) {
  Route r;
  r.lanes = std::move(lanes);
  r.entry_offset = 0.0;
  r.exit_offset = r.lanes.empty() ? 0.0 : g.lanes[r.lanes.back()].length();
  return r;
}

inline bool route_is_connected(const Route& r, const LaneGraph& g) {
  for (std::size_t k = 0; k + 1 < r.lanes.size(); ++k)
    if (!g.adjacency(r.lanes[k], r.lanes[k + 1])) return false;
  return true;
}

// Dense point sequence of a route between its entry and exit offsets.
inline std::vector<Vec2> route_polyline(const Route& r, const LaneGraph& g) {
  std::vector<Vec2> pts;
  for (std::size_t k = 0; k < r.lanes.size(); ++k) {
    const auto& lane = g.lanes[r.lanes[k]];
    const auto cum = lane.arc();
    const double lo = k == 0 ? r.entry_offset : 0.0;
    const double hi = k + 1 == r.lanes.size() ? r.exit_offset : cum.back();
    auto push = [&](Vec2 p) {
      if (pts.empty() || distance(pts.back(), p) > 1e-9) pts.push_back(p);
    };
    push(interpolate(lane.points, cum, lo));
    for (std::size_t i = 0; i < kPolylinePoints; ++i)
      if (cum[i] > lo && cum[i] < hi) push(lane.points[i]);
    push(interpolate(lane.points, cum, hi));
  }
  return pts;
}

// Successor matrix from endpoint proximity: end(i) within 1.5 m of start(j) and the
// end/start headings differ by less than 60 degrees.
inline Adjacency recover_adjacency(std::span<const Polyline> lanes) {
  Adjacency adj(lanes.size());
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const Vec2 end = lanes[i].end();
    const Vec2 end_dir = lanes[i].end_direction();
    for (std::size_t j = 0; j < lanes.size(); ++j) {
      if (i == j) continue;
      if (distance(end, lanes[j].start()) > kConnectionDistance) continue;
      if (angle_between(end_dir, lanes[j].start_direction()) < kConnectionAngle) adj.set(i, j);
    }
  }
  return adj;
}

// ---------------------------------------------------------------------------
// Key points: lane endpoints merged into nodes within the connection tolerance.

struct KeyPoint {
  Vec2 position{};
  std::size_t in_degree = 0;
  std::size_t out_degree = 0;
  std::size_t degree() const { return in_degree + out_degree; }
};

struct NodeGraph {
  std::vector<Vec2> positions;
  std::vector<std::size_t> in_degree;
  std::vector<std::size_t> out_degree;
  std::vector<std::size_t> lane_start;  // node index of each lane's start
  std::vector<std::size_t> lane_end;    // node index of each lane's end
  std::vector<std::vector<std::size_t>> out_lanes;

  std::size_t degree(std::size_t n) const { return in_degree[n] + out_degree[n]; }
};

inline NodeGraph build_node_graph(const LaneGraph& g) {
  const std::size_t n = g.lanes.size();
  std::vector<Vec2> ends(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    ends[2 * i] = g.lanes[i].start();
    ends[2 * i + 1] = g.lanes[i].end();
  }
  std::vector<std::size_t> parent(ends.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < ends.size(); ++a) {
    for (std::size_t b = a + 1; b < ends.size(); ++b) {
      if (distance(ends[a], ends[b]) <= kConnectionDistance) {
        const auto ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  NodeGraph ng;
  std::vector<std::size_t> node_of_root(ends.size(), SIZE_MAX);
  std::vector<std::size_t> node_of(ends.size());
  std::vector<std::size_t> members;
  for (std::size_t a = 0; a < ends.size(); ++a) {
    const auto r = find(a);
    if (node_of_root[r] == SIZE_MAX) {
      node_of_root[r] = ng.positions.size();
      ng.positions.push_back({});
      members.push_back(0);
    }
    node_of[a] = node_of_root[r];
    ng.positions[node_of[a]] += ends[a];
    ++members[node_of[a]];
  }
  for (std::size_t k = 0; k < ng.positions.size(); ++k) ng.positions[k] = ng.positions[k] / static_cast<double>(members[k]);
  ng.in_degree.assign(ng.positions.size(), 0);
  ng.out_degree.assign(ng.positions.size(), 0);
  ng.out_lanes.assign(ng.positions.size(), {});
  for (std::size_t i = 0; i < n; ++i) {
    ng.lane_start.push_back(node_of[2 * i]);
    ng.lane_end.push_back(node_of[2 * i + 1]);
    ++ng.out_degree[node_of[2 * i]];
    ++ng.in_degree[node_of[2 * i + 1]];
    ng.out_lanes[node_of[2 * i]].push_back(i);
  }
  return ng;
}

// Graph nodes whose total degree (in + out) differs from 2.
inline std::vector<KeyPoint> key_points(const LaneGraph& g) {
  const auto ng = build_node_graph(g);
  std::vector<KeyPoint> out;
  for (std::size_t k = 0; k < ng.positions.size(); ++k) {
    if (ng.degree(k) != 2) out.push_back({ng.positions[k], ng.in_degree[k], ng.out_degree[k]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Routes

struct RouteOptions {
  std::size_t max_routes = kDefaultRouteCap;
  // Stop extending a route once it reaches this length (0 = unbounded).
  double max_length = 0.0;
};

// All simple maximal successor paths from start_lane in depth-first order.
inline std::vector<Route> enumerate_routes(const LaneGraph& g, std::size_t start_lane, const RouteOptions& opt = {}) {
  if (start_lane >= g.lanes.size()) throw InputError("enumerate_routes: start lane out of range");
  std::vector<Route> routes;
  std::vector<double> lengths(g.lanes.size());
  for (std::size_t i = 0; i < g.lanes.size(); ++i) lengths[i] = g.lanes[i].length();
  std::vector<std::vector<std::size_t>> succ(g.lanes.size());
  for (std::size_t i = 0; i < g.lanes.size(); ++i) succ[i] = g.adjacency.successors(i);

  std::vector<std::size_t> path{start_lane};
  std::vector<char> on_path(g.lanes.size(), 0);
  on_path[start_lane] = 1;
  auto dfs = [&](auto&& self, double length) -> void {
    if (routes.size() >= opt.max_routes) return;
    const auto cur = path.back();
    bool extended = false;
    if (opt.max_length <= 0.0 || length < opt.max_length) {
      for (auto next : succ[cur]) {
        if (on_path[next]) continue;
        extended = true;
        path.push_back(next);
        on_path[next] = 1;
        self(self, length + lengths[next]);
        on_path[next] = 0;
        path.pop_back();
        if (routes.size() >= opt.max_routes) return;
      }
    }
    if (!extended) routes.push_back(full_route(path, g));
  };
  dfs(dfs, lengths[start_lane]);
  return routes;
}

// Absolute accumulated heading change along a polyline, radians.
inline double heading_change(const Polyline& pl) {
  double total = 0.0;
  Vec2 prev = pl.start_direction();
  for (std::size_t i = 1; i + 1 < kPolylinePoints; ++i) {
    const Vec2 d = pl.points[i + 1] - pl.points[i];
    if (d.squared_norm() <= 0.0) continue;
    total += normalize_angle(d.heading() - prev.heading());
    prev = d;
  }
  return std::abs(total);
}

// A traversed lane counts as one turn when its heading changes by more than 45 degrees.
inline std::size_t count_turns(const Route& r, const LaneGraph& g) {
  std::size_t turns = 0;
  for (auto i : r.lanes)
    if (heading_change(g.lanes[i]) > kTurnThreshold) ++turns;
  return turns;
}

namespace detail {

// true when a is preferred over b for the given difficulty.
inline bool route_preferred(std::size_t turns_a, double len_a, const Route& a, std::size_t turns_b, double len_b,
                            const Route& b, Difficulty d) {
  if (turns_a != turns_b) return d == Difficulty::hard ? turns_a > turns_b : turns_a < turns_b;
  if (len_a != len_b) return len_a > len_b;
  return a.lanes < b.lanes;
}

}  // namespace detail

// Hard: most turns. Easy: fewest turns. Ties go to the longer route, then lower lane indices.
inline Route select_route(const LaneGraph& g, std::size_t start, Difficulty d, const RouteOptions& opt = {}) {
  const auto routes = enumerate_routes(g, start, opt);
  if (routes.empty()) throw InputError("select_route: no route from start lane");
  std::size_t best = 0;
  std::size_t best_turns = count_turns(routes[0], g);
  double best_len = route_length(routes[0], g);
  for (std::size_t k = 1; k < routes.size(); ++k) {
    const auto t = count_turns(routes[k], g);
    const double l = route_length(routes[k], g);
    if (detail::route_preferred(t, l, routes[k], best_turns, best_len, routes[best], d)) {
      best = k;
      best_turns = t;
      best_len = l;
    }
  }
  return routes[best];
}

// ---------------------------------------------------------------------------
// Urban-planning graph features.

struct UrbanFeatures {
  double connectivity = 0.0;  // mean key-point degree
  std::size_t density = 0;    // key-point count
  std::size_t reach = 0;      // valid key-point paths
  double convenience = 0.0;   // mean valid path length, meters
  bool truncated = false;     // path enumeration hit the cap
};

// A valid path is a simple directed path from a source key point (no incoming lanes)
// to a distinct sink key point (no outgoing lanes).
inline UrbanFeatures urban_features(const LaneGraph& g, std::size_t path_cap = kPathEnumerationCap) {
  UrbanFeatures f;
  if (g.lanes.empty()) return f;
  const auto ng = build_node_graph(g);
  std::vector<std::size_t> keys;
  double degree_sum = 0.0;
  for (std::size_t k = 0; k < ng.positions.size(); ++k) {
    if (ng.degree(k) != 2) {
      keys.push_back(k);
      degree_sum += static_cast<double>(ng.degree(k));
    }
  }
  f.density = keys.size();
  f.connectivity = keys.empty() ? 0.0 : degree_sum / static_cast<double>(keys.size());

  std::vector<double> lane_len(g.lanes.size());
  for (std::size_t i = 0; i < g.lanes.size(); ++i) lane_len[i] = g.lanes[i].length();
  std::vector<double> path_lengths;
  std::vector<char> visited(ng.positions.size(), 0);
  auto dfs = [&](auto&& self, std::size_t node, std::size_t origin, double length) -> void {
    if (path_lengths.size() >= path_cap) {
      f.truncated = true;
      return;
    }
    if (node != origin && ng.out_degree[node] == 0 && ng.degree(node) != 2) {
      path_lengths.push_back(length);
      return;
    }
    for (auto lane : ng.out_lanes[node]) {
      const auto next = ng.lane_end[lane];
      if (visited[next]) continue;
      visited[next] = 1;
      self(self, next, origin, length + lane_len[lane]);
      visited[next] = 0;
    }
  };
  for (auto k : keys) {
    if (ng.in_degree[k] != 0 || ng.out_degree[k] == 0) continue;
    visited[k] = 1;
    dfs(dfs, k, k, 0.0);
    visited[k] = 0;
  }
  f.reach = path_lengths.size();
  if (!path_lengths.empty()) {
    std::sort(path_lengths.begin(), path_lengths.end());
    f.convenience = std::accumulate(path_lengths.begin(), path_lengths.end(), 0.0) / static_cast<double>(f.reach);
  }
  return f;
}

// Lane that best matches a pose: smallest distance plus 2 m per radian of heading error.
inline std::optional<std::size_t> nearest_lane(const LaneGraph& g, Vec2 p, std::optional<double> heading = std::nullopt) {
  std::optional<std::size_t> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    const auto cum = g.lanes[i].arc();
    const auto proj = project_onto_polyline(p, g.lanes[i].points, cum);
    double cost = proj.distance;
    if (heading) {
      const Vec2 t = tangent_at(g.lanes[i].points, cum, proj.arc);
      cost += 2.0 * std::abs(normalize_angle(t.heading() - *heading));
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return best;
}

}  // namespace sledge
