#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/lanegraph.hpp"
#include "sledge/scene.hpp"

namespace sledge {

struct IdmParams {
  double desired_speed = 12.0;  // v0
  double max_accel = 1.5;       // a
  double comfort_decel = 2.0;   // b
  double min_gap = 2.0;         // s0
  double headway = 1.5;         // T
  double exponent = 4.0;        // delta
  double max_decel = 4.0;       // hard braking bound
};

struct EgoLimits {
  double max_accel = 4.0;
  double max_decel = 8.0;
  double max_speed = 25.0;
  double min_speed = -5.0;  // reverse allowed
  double max_curvature = 0.3;
  double max_curvature_rate = 0.5;  // 1/m per second
};

struct SimConfig {
  double dt = 0.1;
  double horizon = 30.0;
  double radius = 64.0;  // simulation radius around the ego
  double light_period = 15.0;
  IdmParams idm;
  double lane_width = 3.7;
  EgoLimits ego;
  double projection_distance = 5.0;
  double projection_angle = kPi / 3.0;
  bool record_trace = true;
};

inline void validate_config(const SimConfig& c) {
  const auto& p = c.idm;
  if (!(c.dt > 0.0) || !(c.horizon >= 0.0) || !(c.radius > 0.0) || !(c.light_period > 0.0) || !(c.lane_width > 0.0))
    throw InputError("sim config: dt, radius, light period and lane width must be positive");
  if (!(p.desired_speed > 0.0 && p.max_accel > 0.0 && p.comfort_decel > 0.0 && p.min_gap > 0.0 && p.headway > 0.0 &&
        p.exponent > 0.0 && p.max_decel > 0.0))
    throw InputError("sim config: IDM parameters must be positive");
}

// IDM acceleration for speed v behind a leader at speed v_lead and bumper gap `gap`
// (infinite for a free road). The dynamic part of the desired gap is floored at zero.
inline double idm_acceleration(double v, double v_lead, double gap, const IdmParams& p) {
  const double free = 1.0 - std::pow(std::max(v, 0.0) / p.desired_speed, p.exponent);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    if (gap <= 0.0) return -p.max_decel;
    const double dynamic = v * p.headway + v * (v - v_lead) / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
    const double desired = p.min_gap + std::max(0.0, dynamic);
    interaction = (desired / gap) * (desired / gap);
  }
  return std::clamp(p.max_accel * (free - interaction), -p.max_decel, p.max_accel);
}

// Desired gap s* at speed v closing on a leader at v_lead.
inline double idm_desired_gap(double v, double v_lead, const IdmParams& p) {
  return p.min_gap + std::max(0.0, v * p.headway + v * (v - v_lead) / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
}

struct LaneProjection {
  std::size_t lane = 0;
  double arc = 0.0;
  double lateral = 0.0;
  double heading_error = 0.0;
};

// Lane minimizing lateral distance + 2 m/rad of heading error among lanes within
// `max_distance` and `max_angle`.
inline std::optional<LaneProjection> try_project_to_lane(Vec2 center, double heading, const LaneGraph& g,
                                                         double max_distance = 5.0, double max_angle = kPi / 3.0) {
  std::optional<LaneProjection> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    const auto cum = g.lanes[i].arc();
    const auto proj = project_onto_polyline(center, g.lanes[i].points, cum);
    if (proj.distance > max_distance) continue;
    const double err = std::abs(normalize_angle(tangent_at(g.lanes[i].points, cum, proj.arc).heading() - heading));
    if (err >= max_angle) continue;
    const double cost = proj.distance + 2.0 * err;
    if (cost < best_cost) {
      best_cost = cost;
      best = LaneProjection{i, proj.arc, proj.distance, err};
    }
  }
  return best;
}

inline LaneProjection project_to_lane(const AgentBox& box, const LaneGraph& g, double max_distance = 5.0,
                                      double max_angle = kPi / 3.0) {
  if (g.lanes.empty()) throw InputError("project_to_lane: empty lane graph");
  auto p = try_project_to_lane(box.center, box.heading, g, max_distance, max_angle);
  if (!p) throw InputError("project_to_lane: no lane within distance and heading limits");
  return *p;
}

// ---------------------------------------------------------------------------
// Simulation state

enum class AgentMode {
  lane_following,  // vehicles bound to a lane
  constant_velocity,
  fixed  // static objects and vehicles that could not be bound to a lane
};

struct SimAgent {
  AgentBox box;
  AgentMode mode = AgentMode::fixed;
  std::size_t lane = 0;
  double arc = 0.0;
  double overrun = 0.0;  // meters driven past a lane end without successor
  bool active = false;
};

struct EgoState {
  Vec2 position{};
  double heading = 0.0;
  double speed = 0.0;
  double curvature = 0.0;

  OrientedBox box() const { return {position, heading, kEgoExtent.length, kEgoExtent.width}; }
  Vec2 velocity() const { return unit_vector(heading) * speed; }
};

struct EgoAction {
  double acceleration = 0.0;
  double curvature = 0.0;
};

struct SimEvent {
  std::string kind;  // collision, off_road, light_flip, passive_static
  double t = 0.0;
  std::string payload;
};

struct TraceRow {
  double t = 0.0;
  long entity = 0;  // 0 is the ego, agent i is i + 1
  std::string_view kind;
  Vec2 position{};
  double heading = 0.0;
  double speed = 0.0;
  bool active = true;
};

struct LightState {
  Polyline polyline;
  std::optional<std::size_t> lane;  // lane whose start is the stop line
  bool red = false;
};

// Immutable per-scenario data shared by all states of one run.
struct SimMap {
  SceneState scene;
  std::vector<std::vector<double>> cum;
  std::vector<std::optional<std::size_t>> first_successor;
  std::vector<std::vector<std::size_t>> lights_of_lane;

  explicit SimMap(SceneState s) : scene(std::move(s)) {
    const auto& g = scene.graph;
    for (std::size_t i = 0; i < g.lanes.size(); ++i) {
      cum.push_back(g.lanes[i].arc());
      const auto succ = g.adjacency.successors(i);
      first_successor.push_back(succ.empty() ? std::nullopt : std::optional<std::size_t>(succ.front()));
    }
    lights_of_lane.resize(g.lanes.size());
  }
  const Polyline& lane(std::size_t i) const { return scene.graph.lanes[i]; }
  double length(std::size_t i) const { return cum[i].back(); }
};

struct SimState {
  std::shared_ptr<const SimMap> map;
  long steps = 0;
  double clock = 0.0;
  EgoState ego;
  std::vector<SimAgent> agents;
  std::vector<LightState> lights;
  Route route;
  std::vector<SimEvent> events;
  std::vector<TraceRow> trace;
  std::vector<char> in_contact;  // per agent, ego boxes currently overlapping
  bool off_road = false;
};

inline std::string_view trace_kind(AgentKind k) { return to_string(k); }

namespace detail {

inline void record(SimState& s) {
  s.trace.push_back({s.clock, 0, "ego", s.ego.position, s.ego.heading, s.ego.speed, true});
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    s.trace.push_back({s.clock, static_cast<long>(i + 1), trace_kind(a.box.kind), a.box.center, a.box.heading,
                       a.box.speed.value_or(0.0), a.active});
  }
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline SimState init_simulation(const SceneState& scene, const Route& route, const SimConfig& cfg = {}) {
  validate_config(cfg);
  for (auto l : route.lanes)
    if (l >= scene.graph.lanes.size()) throw InputError("init_simulation: route lane out of range");
  if (!route_is_connected(route, scene.graph)) throw InputError("init_simulation: route is not connected");

  auto map = std::make_shared<SimMap>(scene);
  SimState s;
  s.route = route;
  s.ego.speed = scene.ego_velocity.norm();
  if (s.ego.speed > 0.0 && scene.ego_velocity.x < 0.0) s.ego.speed = -s.ego.speed;

  auto bind_lights = [&](const std::vector<Polyline>& lights, bool red) {
    for (const auto& l : lights) {
      LightState ls{l, std::nullopt, red};
      double best = kLightLaneTolerance;
      for (std::size_t i = 0; i < scene.graph.lanes.size(); ++i) {
        const double d = distance(scene.graph.lanes[i].start(), l.start());
        if (d <= best && angle_between(scene.graph.lanes[i].start_direction(), l.start_direction()) < kPi / 4.0) {
          best = d;
          ls.lane = i;
        }
      }
      if (ls.lane) map->lights_of_lane[*ls.lane].push_back(s.lights.size());
      s.lights.push_back(ls);
    }
  };
  bind_lights(scene.red_lights, true);
  bind_lights(scene.green_lights, false);

  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    SimAgent a;
    a.box = scene.agents[i];
    switch (a.box.kind) {
      case AgentKind::vehicle: {
        const auto p = try_project_to_lane(a.box.center, a.box.heading, scene.graph, cfg.projection_distance,
                                           cfg.projection_angle);
        if (!p) {
          a.mode = AgentMode::fixed;
          s.events.push_back({"passive_static", 0.0, std::to_string(i + 1)});
          break;
        }
        a.mode = AgentMode::lane_following;
        a.lane = p->lane;
        a.arc = p->arc;
        const auto& lane = map->lane(a.lane);
        a.box.center = interpolate(lane.points, map->cum[a.lane], a.arc);
        a.box.heading = tangent_at(lane.points, map->cum[a.lane], a.arc).heading();
        break;
      }
      case AgentKind::pedestrian:
        a.mode = AgentMode::constant_velocity;
        break;
      case AgentKind::static_object:
        a.mode = AgentMode::fixed;
        break;
    }
    a.active = distance(a.box.center, s.ego.position) < cfg.radius;
    s.agents.push_back(a);
  }
  s.map = std::move(map);
  if (cfg.record_trace) detail::record(s);
  return s;
}

namespace detail {

// Centerline ahead of a lane-bound vehicle, starting at its current position.
struct Path {
  std::vector<Vec2> pts;
  std::vector<double> cum;
  std::vector<std::pair<double, std::size_t>> lane_starts;  // arc of each later lane's start
};

inline Path build_path(const SimMap& m, const SimAgent& a, double lookahead) {
  Path p;
  auto push = [&](Vec2 q) {
    if (!p.pts.empty() && distance(p.pts.back(), q) <= 1e-9) return;
    p.cum.push_back(p.pts.empty() ? 0.0 : p.cum.back() + distance(p.pts.back(), q));
    p.pts.push_back(q);
  };
  push(a.box.center);
  Vec2 dir = unit_vector(a.box.heading);
  if (a.overrun <= 0.0) {
    std::size_t lane = a.lane;
    const auto& first = m.lane(lane);
    for (std::size_t i = 0; i < kPolylinePoints; ++i)
      if (m.cum[lane][i] > a.arc) push(first.points[i]);
    dir = first.end_direction();
    for (int hops = 0; hops < 64 && p.cum.back() < lookahead; ++hops) {
      const auto next = m.first_successor[lane];
      if (!next) break;
      lane = *next;
      p.lane_starts.push_back({p.cum.back(), lane});
      for (std::size_t i = 1; i < kPolylinePoints; ++i) push(m.lane(lane).points[i]);
      dir = m.lane(lane).end_direction();
    }
  }
  if (p.cum.back() < lookahead) push(p.pts.back() + dir * (lookahead - p.cum.back() + 1.0));
  return p;
}

struct Obstacle {
  OrientedBox box;
  Vec2 velocity;
};

inline void advance_on_lane(const SimMap& m, SimAgent& a, double ds) {
  if (a.overrun > 0.0) {
    a.overrun += ds;
  } else {
    a.arc += ds;
    while (a.arc > m.length(a.lane)) {
      const auto next = m.first_successor[a.lane];
      if (!next) {
        a.overrun = a.arc - m.length(a.lane);
        a.arc = m.length(a.lane);
        break;
      }
      a.arc -= m.length(a.lane);
      a.lane = *next;
    }
  }
  const auto& lane = m.lane(a.lane);
  if (a.overrun > 0.0) {
    // Past a lane end without successor the vehicle keeps straight on.
    a.box.center = lane.end() + lane.end_direction() * a.overrun;
    a.box.heading = lane.end_direction().heading();
  } else {
    a.box.center = interpolate(lane.points, m.cum[a.lane], a.arc);
    a.box.heading = tangent_at(lane.points, m.cum[a.lane], a.arc).heading();
  }
}

inline double lane_following_accel(const SimState& s, std::size_t self, const std::vector<Obstacle>& obstacles,
                                   const SimConfig& cfg) {
  const auto& m = *s.map;
  const auto& a = s.agents[self];
  const auto& p = cfg.idm;
  const double v = a.box.speed.value_or(0.0);
  const double lookahead = std::max(40.0, v * p.headway + v * v / (2.0 * p.comfort_decel) + 30.0);
  const Path path = build_path(m, a, lookahead);
  const double own_half = a.box.extent.length / 2.0;
  double acc = idm_acceleration(v, 0.0, std::numeric_limits<double>::infinity(), p);

  for (std::size_t j = 0; j < obstacles.size(); ++j) {
    if (j == self + 1) continue;  // obstacle 0 is the ego
    const auto& o = obstacles[j];
    if (distance(o.box.center, a.box.center) > lookahead + o.box.circumradius() + 1.0) continue;
    const auto proj = project_onto_polyline(o.box.center, path.pts, path.cum);
    if (proj.arc <= 0.0 || proj.distance > cfg.lane_width / 2.0) continue;
    const Vec2 t = tangent_at(path.pts, path.cum, proj.arc);
    const double rel = o.box.heading - t.heading();
    const double o_half = 0.5 * (o.box.length * std::abs(std::cos(rel)) + o.box.width * std::abs(std::sin(rel)));
    const double gap = proj.arc - o_half - own_half;
    acc = std::min(acc, idm_acceleration(v, std::max(0.0, o.velocity.dot(t)), gap, p));
  }
  // A red light acts as a standing leader at the start of the lane it controls.
  for (const auto& [arc, lane] : path.lane_starts) {
    bool red = false;
    for (auto li : m.lights_of_lane[lane]) red = red || s.lights[li].red;
    if (!red) continue;
    const double gap = arc - own_half;
    if (gap > 0.0) acc = std::min(acc, idm_acceleration(v, 0.0, gap, p));
  }
  return acc;
}

inline double centerline_distance(const SimMap& m, Vec2 q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : m.scene.graph.lanes) best = std::min(best, point_polyline_distance(q, l.points));
  return best;
}

}  // namespace detail

// Advances the state by one step in place.
inline void advance(SimState& s, const EgoAction& action, const SimConfig& cfg) {
  if (s.clock + cfg.dt > cfg.horizon + 1e-9) throw InputError("step: horizon exceeded");
  const auto& m = *s.map;
  if (s.in_contact.size() != s.agents.size()) s.in_contact.assign(s.agents.size(), 0);

  // (a) gating against the ego position at the start of the step.
  for (auto& a : s.agents) a.active = distance(a.box.center, s.ego.position) < cfg.radius;

  // Synchronous update: every controller sees the same snapshot.
  std::vector<detail::Obstacle> obstacles;
  obstacles.reserve(s.agents.size() + 1);
  obstacles.push_back({s.ego.box(), s.ego.velocity()});
  for (const auto& a : s.agents) obstacles.push_back({a.box.box(), a.box.velocity()});

  std::vector<double> accel(s.agents.size(), 0.0);
  for (std::size_t i = 0; i < s.agents.size(); ++i)
    if (s.agents[i].active && s.agents[i].mode == AgentMode::lane_following)
      accel[i] = detail::lane_following_accel(s, i, obstacles, cfg);

  // (b) vehicles and (c) pedestrians.
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    auto& a = s.agents[i];
    if (!a.active) continue;
    if (a.mode == AgentMode::lane_following) {
      const double v = a.box.speed.value_or(0.0);
      double v_next = v + accel[i] * cfg.dt;
      double ds = 0.5 * (v + v_next) * cfg.dt;
      if (v_next < 0.0) {
        ds = accel[i] < 0.0 ? v * v / (-2.0 * accel[i]) : 0.0;
        v_next = 0.0;
      }
      a.box.speed = v_next;
      detail::advance_on_lane(m, a, ds);
    } else if (a.mode == AgentMode::constant_velocity) {
      a.box.center = a.box.center + a.box.velocity() * cfg.dt;
    }
  }

  // (e) ego unicycle with bounded acceleration, speed, curvature and curvature rate.
  auto& e = s.ego;
  const auto& lim = cfg.ego;
  const double target = std::clamp(action.curvature, -lim.max_curvature, lim.max_curvature);
  const double max_step = lim.max_curvature_rate * cfg.dt;
  e.curvature += std::clamp(target - e.curvature, -max_step, max_step);
  const double acc = std::clamp(action.acceleration, -lim.max_decel, lim.max_accel);
  const double v_next = std::clamp(e.speed + acc * cfg.dt, lim.min_speed, lim.max_speed);
  const double ds = 0.5 * (e.speed + v_next) * cfg.dt;
  e.position = e.position + unit_vector(e.heading + 0.5 * e.curvature * ds) * ds;
  e.heading = normalize_angle(e.heading + e.curvature * ds);
  e.speed = v_next;

  // (d) clock and light cycling.
  const double before = s.clock;
  ++s.steps;
  s.clock = static_cast<double>(s.steps) * cfg.dt;
  const auto phase = [&](double t) { return static_cast<long>(std::floor(t / cfg.light_period + 1e-9)); };
  if (phase(s.clock) != phase(before)) {
    for (auto& l : s.lights) l.red = !l.red;
    if (!s.lights.empty()) s.events.push_back({"light_flip", s.clock, std::to_string(s.lights.size())});
  }

  // (f) ego collision and off-road checks.
  const auto ego_box = e.box();
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto b = s.agents[i].box.box();
    const bool contact = distance(b.center, ego_box.center) <= b.circumradius() + ego_box.circumradius() &&
                         boxes_overlap(b, ego_box);
    if (contact && !s.in_contact[i]) s.events.push_back({"collision", s.clock, std::to_string(i + 1)});
    s.in_contact[i] = contact;
  }
  const bool off = detail::centerline_distance(m, e.position) > cfg.lane_width / 2.0 + 0.5;
  if (off && !s.off_road) s.events.push_back({"off_road", s.clock, ""});
  s.off_road = off;

  if (cfg.record_trace) detail::record(s);
}

inline SimState step(SimState s, const EgoAction& action, const SimConfig& cfg) {
  advance(s, action, cfg);
  return s;
}

// ---------------------------------------------------------------------------
// Trace and event output

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "t,entity_id,kind,x,y,heading,speed,active\n";
  for (const auto& r : rows) {
    out += detail::format_double(r.t) + ',' + std::to_string(r.entity) + ',' + std::string(r.kind) + ',' +
           detail::format_double(r.position.x) + ',' + detail::format_double(r.position.y) + ',' +
           detail::format_double(r.heading) + ',' + detail::format_double(r.speed) + ',' + (r.active ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string event_log(const std::vector<SimEvent>& events) {
  std::string out;
  for (const auto& e : events) out += e.kind + ',' + detail::format_double(e.t) + ',' + e.payload + '\n';
  return out;
}

}  // namespace sledge
