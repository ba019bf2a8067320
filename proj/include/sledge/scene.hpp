#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"

namespace sledge {

inline constexpr std::size_t kPolylinePoints = 20;
inline constexpr double kDefaultFov = 64.0;
// Lane succession tolerances used for adjacency recovery and node merging.
inline constexpr double kConnectionDistance = 1.5;
inline constexpr double kConnectionAngle = 60.0 * kPi / 180.0;
// Light polylines must lie on a lane centerline within this lateral tolerance.
inline constexpr double kLightLaneTolerance = 0.5;
// Clipped remnants shorter than this are dropped.
inline constexpr double kMinClippedLength = 0.5;

// Fixed-size 20-point centerline in the ego-centered BEV frame (meters).
struct Polyline {
  std::array<Vec2, kPolylinePoints> points{};

  static Polyline from_points(std::span<const Vec2> pts) {
    if (pts.size() != kPolylinePoints) {
      throw InputError("polyline length " + std::to_string(pts.size()) + " != 20");
    }
    Polyline p;
    std::copy(pts.begin(), pts.end(), p.points.begin());
    return p;
  }
  // Resamples any polyline with positive arc length to 20 points.
  static Polyline resampled(std::span<const Vec2> pts) {
    const auto r = resample(pts, kPolylinePoints);
    return from_points(r);
  }

  const Vec2& start() const { return points.front(); }
  const Vec2& end() const { return points.back(); }
  double length() const { return polyline_length(points); }
  std::vector<double> arc() const { return cumulative_lengths(points); }
  Vec2 start_direction() const { return (points[1] - points[0]).normalized(); }
  Vec2 end_direction() const { return (points[kPolylinePoints - 1] - points[kPolylinePoints - 2]).normalized(); }

  bool operator==(const Polyline&) const = default;
};

// Dense N x N successor matrix; entry (i, j) is set iff lane j succeeds lane i.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool value = true) { bits_[i * n_ + j] = value ? 1 : 0; }

  std::vector<std::size_t> successors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_; ++j)
      if ((*this)(i, j)) out.push_back(j);
    return out;
  }
  std::vector<std::size_t> predecessors(std::size_t j) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_; ++i)
      if ((*this)(i, j)) out.push_back(i);
    return out;
  }
  std::size_t edge_count() const {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
  }

  bool operator==(const Adjacency&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct LaneGraph {
  std::vector<Polyline> lanes;
  Adjacency adjacency;

  LaneGraph() = default;
  explicit LaneGraph(std::vector<Polyline> l) : lanes(std::move(l)), adjacency(lanes.size()) {}
  LaneGraph(std::vector<Polyline> l, Adjacency a) : lanes(std::move(l)), adjacency(std::move(a)) {}

  std::size_t size() const { return lanes.size(); }
  bool empty() const { return lanes.empty(); }

  bool operator==(const LaneGraph&) const = default;
};

enum class AgentKind { pedestrian, vehicle, static_object };

inline std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::pedestrian:
      return "pedestrian";
    case AgentKind::vehicle:
      return "vehicle";
    case AgentKind::static_object:
      return "static";
  }
  return "static";
}

inline AgentKind parse_agent_kind(std::string_view s) {
  if (s == "pedestrian") return AgentKind::pedestrian;
  if (s == "vehicle") return AgentKind::vehicle;
  if (s == "static") return AgentKind::static_object;
  throw InputError("unknown agent kind '" + std::string(s) + "'");
}

struct Extent {
  double length = 0.0;
  double width = 0.0;
  bool operator==(const Extent&) const = default;
};

struct AgentBox {
  AgentKind kind = AgentKind::vehicle;
  Vec2 center{};
  double heading = 0.0;
  Extent extent{};
  std::optional<double> speed;  // absent for static objects

  OrientedBox box() const { return {center, heading, extent.length, extent.width}; }
  Vec2 velocity() const { return unit_vector(heading) * speed.value_or(0.0); }

  bool operator==(const AgentBox&) const = default;
};

struct SceneState {
  LaneGraph graph;
  std::vector<Polyline> red_lights;
  std::vector<Polyline> green_lights;
  std::vector<AgentBox> agents;
  Vec2 ego_velocity{};
  double fov = kDefaultFov;
  std::optional<std::string> city;

  bool operator==(const SceneState&) const = default;
};

// Ego footprint used wherever the ego is treated as a box.
inline constexpr Extent kEgoExtent{4.6, 1.9};

inline OrientedBox ego_box_at_origin() { return {{0.0, 0.0}, 0.0, kEgoExtent.length, kEgoExtent.width}; }

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline bool finite(Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

inline void check_polyline(const Polyline& pl, double half_fov, const std::string& field) {
  for (const auto& p : pl.points) {
    if (!finite(p)) throw InvariantError(field + ": non-finite coordinate");
    if (!inside_square(p, half_fov, 1e-6)) throw InvariantError(field + ": point outside the field of view");
  }
  if (!(pl.length() > 0.0)) throw InvariantError(field + ": zero arc length");
}

}  // namespace detail

// Throws InvariantError naming the offending field when a SceneState invariant fails.
inline void validate_scene(const SceneState& s) {
  if (!(s.fov > 0.0) || !std::isfinite(s.fov)) throw InvariantError("fov_m: must be positive");
  const double half = s.fov / 2.0;
  const auto& g = s.graph;
  if (g.adjacency.size() != g.lanes.size()) throw InvariantError("lanes: adjacency size mismatch");
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    detail::check_polyline(g.lanes[i], half, "lanes[" + std::to_string(i) + "].points");
  }
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    for (std::size_t j = 0; j < g.lanes.size(); ++j) {
      if (!g.adjacency(i, j)) continue;
      const std::string field = "lanes[" + std::to_string(i) + "].successors";
      if (i == j) throw InvariantError(field + ": lane lists itself as successor");
      if (distance(g.lanes[i].end(), g.lanes[j].start()) > kConnectionDistance + 1e-9) {
        throw InvariantError(field + ": successor " + std::to_string(j) + " starts beyond the connection tolerance");
      }
    }
  }
  auto check_lights = [&](const std::vector<Polyline>& lights, const char* name) {
    for (std::size_t i = 0; i < lights.size(); ++i) {
      const std::string field = std::string(name) + "[" + std::to_string(i) + "]";
      detail::check_polyline(lights[i], half, field);
      bool on_lane = false;
      for (const auto& lane : g.lanes) {
        bool all = true;
        for (const auto& p : lights[i].points) {
          if (point_polyline_distance(p, lane.points) > kLightLaneTolerance + 1e-6) {
            all = false;
            break;
          }
        }
        if (all) {
          on_lane = true;
          break;
        }
      }
      if (!on_lane) throw InvariantError(field + ": light polyline does not lie on any lane centerline");
    }
  };
  check_lights(s.red_lights, "red_lights");
  check_lights(s.green_lights, "green_lights");
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    const std::string field = "agents[" + std::to_string(i) + "]";
    if (!detail::finite(a.center) || !std::isfinite(a.heading)) throw InvariantError(field + ": non-finite pose");
    if (!inside_square(a.center, half, 1e-6)) throw InvariantError(field + ".center: outside the field of view");
    if (!(a.extent.length > 0.0) || !(a.extent.width > 0.0)) throw InvariantError(field + ".extent: must be positive");
    if (a.kind == AgentKind::static_object && a.speed) throw InvariantError(field + ".speed: static objects have no speed");
    if (a.speed && !(*a.speed >= 0.0)) throw InvariantError(field + ".speed: must be non-negative");
  }
  if (!detail::finite(s.ego_velocity)) throw InvariantError("ego_velocity: non-finite");
}

// ---------------------------------------------------------------------------
// Canonical quantization (the serialized form keeps 6 decimals).

inline double quantize(double v) {
  const double q = std::round(v * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;
}

inline Vec2 quantize(Vec2 p) { return {quantize(p.x), quantize(p.y)}; }

inline Polyline quantize(const Polyline& pl) {
  Polyline out;
  for (std::size_t i = 0; i < kPolylinePoints; ++i) out.points[i] = quantize(pl.points[i]);
  return out;
}

inline SceneState quantize_scene(SceneState s) {
  for (auto& l : s.graph.lanes) l = quantize(l);
  for (auto& l : s.red_lights) l = quantize(l);
  for (auto& l : s.green_lights) l = quantize(l);
  for (auto& a : s.agents) {
    a.center = quantize(a.center);
    a.heading = quantize(a.heading);
    a.extent = {quantize(a.extent.length), quantize(a.extent.width)};
    if (a.speed) a.speed = quantize(*a.speed);
  }
  s.ego_velocity = quantize(s.ego_velocity);
  s.fov = quantize(s.fov);
  return s;
}

// ---------------------------------------------------------------------------
// Rigid transform with field-of-view cropping.

struct LaneOrigin {
  std::size_t source = 0;   // index of the lane in the input scene
  bool keeps_start = true;  // the piece starts at the source lane's start
  bool keeps_end = true;
};

struct TransformedScene {
  SceneState scene;
  std::vector<LaneOrigin> lane_origin;
};

namespace detail {

struct ClippedPiece {
  Polyline polyline;
  bool keeps_start;
  bool keeps_end;
};

inline std::vector<ClippedPiece> clip_to_fov(const Polyline& pl, const Pose& pose, double half) {
  std::array<Vec2, kPolylinePoints> local{};
  bool all_inside = true;
  for (std::size_t i = 0; i < kPolylinePoints; ++i) {
    local[i] = pose.to_child(pl.points[i]);
    all_inside = all_inside && inside_square(local[i], half, 1e-7);
  }
  std::vector<ClippedPiece> out;
  if (all_inside) {
    Polyline p;
    p.points = local;
    out.push_back({p, true, true});
    return out;
  }
  for (const auto& run : clip_polyline_to_square(local, half)) {
    if (polyline_length(run) < kMinClippedLength) continue;
    out.push_back({Polyline::resampled(run), distance(run.front(), local.front()) <= 1e-9,
                   distance(run.back(), local.back()) <= 1e-9});
  }
  return out;
}

}  // namespace detail

// Re-expresses the scene in the frame of `pose` (given in the scene's frame) and crops it
// to the same square field of view. Lane pieces keep an edge only where both touching
// endpoints survive the crop.
inline TransformedScene transform_scene_traced(const SceneState& scene, const Pose& pose) {
  TransformedScene out;
  auto& s = out.scene;
  s.fov = scene.fov;
  s.city = scene.city;
  const double half = scene.fov / 2.0;

  std::vector<Polyline> lanes;
  for (std::size_t i = 0; i < scene.graph.lanes.size(); ++i) {
    for (auto& piece : detail::clip_to_fov(scene.graph.lanes[i], pose, half)) {
      lanes.push_back(piece.polyline);
      out.lane_origin.push_back({i, piece.keeps_start, piece.keeps_end});
    }
  }
  Adjacency adj(lanes.size());
  for (std::size_t a = 0; a < lanes.size(); ++a) {
    if (!out.lane_origin[a].keeps_end) continue;
    for (std::size_t b = 0; b < lanes.size(); ++b) {
      if (a != b && out.lane_origin[b].keeps_start &&
          scene.graph.adjacency(out.lane_origin[a].source, out.lane_origin[b].source)) {
        adj.set(a, b);
      }
    }
  }
  s.graph = LaneGraph(std::move(lanes), std::move(adj));

  auto clip_lights = [&](const std::vector<Polyline>& in) {
    std::vector<Polyline> res;
    for (const auto& l : in)
      for (auto& piece : detail::clip_to_fov(l, pose, half)) res.push_back(piece.polyline);
    return res;
  };
  s.red_lights = clip_lights(scene.red_lights);
  s.green_lights = clip_lights(scene.green_lights);

  for (const auto& a : scene.agents) {
    const Vec2 c = pose.to_child(a.center);
    if (!inside_square(c, half)) continue;
    AgentBox t = a;
    t.center = c;
    t.heading = normalize_angle(a.heading - pose.rotation);
    s.agents.push_back(t);
  }
  s.ego_velocity = pose.rotate_to_child(scene.ego_velocity);
  return out;
}

inline SceneState transform_scene(const SceneState& scene, const Pose& pose) {
  return transform_scene_traced(scene, pose).scene;
}

}  // namespace sledge
