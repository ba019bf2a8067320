#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/lanegraph.hpp"
#include "sledge/scene.hpp"
#include "sledge/sim.hpp"

namespace sledge {

inline constexpr double kLowProgress = 0.2;
inline constexpr double kWrongDirectionLimit = 6.0;
inline constexpr double kOffRoadMargin = 0.5;

// Baseline planner conflict handling.
inline constexpr double kCorridorMargin = 0.3;
inline constexpr double kMinCrossingSpeed = 0.5;
inline constexpr double kCrossingStep = 0.25;
inline constexpr double kCrossingHorizon = 4.0;
inline constexpr double kCrossingSlack = 1.0;
inline constexpr double kCrossingAngle = 30.0 * kPi / 180.0;

// Dense centerline of a route with the arc position at which each route lane starts.
struct RouteGeometry {
  std::vector<Vec2> pts;
  std::vector<double> cum;
  std::vector<std::size_t> lanes;
  std::vector<double> lane_start;

  double length() const { return cum.empty() ? 0.0 : cum.back(); }
};

inline RouteGeometry route_geometry(const Route& r, const LaneGraph& g) {
  RouteGeometry out;
  auto push = [&](Vec2 p) {
    if (!out.pts.empty() && distance(out.pts.back(), p) <= 1e-9) return;
    out.cum.push_back(out.pts.empty() ? 0.0 : out.cum.back() + distance(out.pts.back(), p));
    out.pts.push_back(p);
  };
  for (std::size_t k = 0; k < r.lanes.size(); ++k) {
    const auto& lane = g.lanes[r.lanes[k]];
    const auto cum = lane.arc();
    const double lo = k == 0 ? r.entry_offset : 0.0;
    const double hi = k + 1 == r.lanes.size() ? r.exit_offset : cum.back();
    out.lanes.push_back(r.lanes[k]);
    out.lane_start.push_back(out.pts.empty() ? 0.0 : out.cum.back());
    push(interpolate(lane.points, cum, lo));
    for (std::size_t i = 0; i < kPolylinePoints; ++i)
      if (cum[i] > lo && cum[i] < hi) push(lane.points[i]);
    push(interpolate(lane.points, cum, hi));
  }
  if (out.pts.size() < 2) throw InputError("route geometry: route has no extent");
  return out;
}

// Projection restricted to the arc window [lo, hi], so a route that crosses itself is
// tracked along the branch currently being driven.
inline PolylineProjection project_in_window(const RouteGeometry& rg, Vec2 p, double lo, double hi) {
  PolylineProjection best{};
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < rg.pts.size(); ++i) {
    if (rg.cum[i + 1] < lo || rg.cum[i] > hi) continue;
    const auto sp = project_onto_segment(p, rg.pts[i], rg.pts[i + 1]);
    if (sp.distance < best.distance) {
      best.distance = sp.distance;
      best.foot = sp.foot;
      best.segment = i;
      best.arc = rg.cum[i] + sp.t * (rg.cum[i + 1] - rg.cum[i]);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Planners

struct PlannerInput {
  const SimState& state;
  const SimConfig& config;
  const RouteGeometry& route;
  double route_arc;  // adjudicated position of the ego along the route
};

using Planner = std::function<EgoAction(const PlannerInput&)>;

inline EgoAction zero_planner(const PlannerInput&) { return {}; }

namespace detail {

inline double route_curvature_ahead(const RouteGeometry& rg, double from, double span) {
  double worst = 0.0;
  const double step = 2.0;
  for (double s = from; s + step <= std::min(from + span, rg.length()); s += step) {
    const Vec2 a = tangent_at(rg.pts, rg.cum, s);
    const Vec2 b = tangent_at(rg.pts, rg.cum, s + step);
    worst = std::max(worst, angle_between(a, b) / step);
  }
  return worst;
}

}  // namespace detail

// Pure pursuit on the route centerline with IDM speed control against on-route agents,
// red stop lines and the route end. Only agents inside the simulation radius are seen.
inline EgoAction baseline_planner(const PlannerInput& in) {
  const auto& s = in.state;
  const auto& e = s.ego;
  const auto& rg = in.route;
  const auto& p = in.config.idm;
  const double v = e.speed;

  const double lookahead = std::max(5.0, 1.0 * std::abs(v));
  const double arc = in.route_arc;
  const Vec2 target = interpolate(rg.pts, rg.cum, std::min(arc + lookahead, rg.length()));
  const Vec2 local = Pose{e.position, e.heading}.to_child(target);
  const double d2 = local.squared_norm();
  const double curvature = d2 > 1e-9 ? 2.0 * local.y / d2 : 0.0;

  IdmParams idm = p;
  const double kappa = detail::route_curvature_ahead(rg, arc, std::max(20.0, 3.0 * std::abs(v)));
  if (kappa > 1e-6) idm.desired_speed = std::clamp(std::sqrt(2.0 / kappa), 3.0, p.desired_speed);

  // The route end is a stop target for the ego center.
  double acc = idm_acceleration(v, 0.0, rg.length() - arc + p.min_gap, idm);
  const double own_half = kEgoExtent.length / 2.0;
  const double horizon = std::max(40.0, v * p.headway + v * v / (2.0 * p.comfort_decel) + 30.0);
  const double stopping = v * v / (2.0 * p.max_decel);
  for (const auto& a : s.agents) {
    if (!a.active || distance(a.box.center, e.position) > horizon + 5.0) continue;
    const auto half_extents = [&](double rel) {
      const double c = std::abs(std::cos(rel)), sn = std::abs(std::sin(rel));
      return std::pair{0.5 * (a.box.extent.length * c + a.box.extent.width * sn),
                       0.5 * (a.box.extent.length * sn + a.box.extent.width * c)};
    };
    // Agents whose footprint reaches into the route corridor are leaders.
    const auto proj = project_in_window(rg, a.box.center, arc, arc + horizon);
    if (proj.arc > arc) {
      const Vec2 t = tangent_at(rg.pts, rg.cum, proj.arc);
      const auto [o_long, o_lat] = half_extents(a.box.heading - t.heading());
      if (proj.distance < kEgoExtent.width / 2.0 + o_lat + kCorridorMargin) {
        acc = std::min(acc, idm_acceleration(v, std::max(0.0, a.box.velocity().dot(t)), proj.arc - arc - o_long - own_half, idm));
        continue;
      }
    }
    // Crossing agents: yield where the predicted path enters the corridor, unless the
    // ego gets there first or can no longer stop.
    const Vec2 vel = a.box.velocity();
    if (vel.norm() < kMinCrossingSpeed) continue;
    for (double tau = kCrossingStep; tau <= kCrossingHorizon + 1e-9; tau += kCrossingStep) {
      const Vec2 q = a.box.center + vel * tau;
      const auto cp = project_in_window(rg, q, arc, arc + horizon);
      if (cp.arc <= arc) continue;
      const Vec2 t = tangent_at(rg.pts, rg.cum, cp.arc);
      if (angle_between(t, vel) < kCrossingAngle) break;
      const auto [o_long, o_lat] = half_extents(a.box.heading - t.heading());
      if (cp.distance >= kEgoExtent.width / 2.0 + o_lat + kCorridorMargin) continue;
      const double gap = cp.arc - arc - o_long - own_half;
      const double ego_time = (cp.arc - arc + o_long + own_half) / std::max(std::abs(v), 1.0);
      if (gap > stopping && ego_time > tau - kCrossingSlack) acc = std::min(acc, idm_acceleration(v, 0.0, gap, idm));
      break;
    }
  }
  for (const auto& l : s.lights) {
    if (!l.red || !l.lane) continue;
    for (std::size_t k = 0; k < rg.lanes.size(); ++k) {
      if (rg.lanes[k] != *l.lane) continue;
      const double gap = rg.lane_start[k] - arc - own_half;
      if (gap > 0.0) acc = std::min(acc, idm_acceleration(v, 0.0, gap, idm));
    }
  }
  if (arc + 1e-6 >= rg.length()) acc = -p.max_decel;
  // Never reverse.
  if (v + acc * in.config.dt < 0.0) acc = -v / in.config.dt;
  return {acc, curvature};
}

// ---------------------------------------------------------------------------
// Adjudication

enum class FailureCause { none, low_progress, wrong_direction, off_road, at_fault_collision };

inline std::string_view to_string(FailureCause c) {
  switch (c) {
    case FailureCause::none:
      return "none";
    case FailureCause::low_progress:
      return "low_progress";
    case FailureCause::wrong_direction:
      return "wrong_direction";
    case FailureCause::off_road:
      return "off_road";
    case FailureCause::at_fault_collision:
      return "at_fault_collision";
  }
  return "none";
}

struct FailureReport {
  bool failed = false;
  FailureCause cause = FailureCause::none;
  double progress = 0.0;  // fraction of the route
  double wrong_direction = 0.0;  // meters
  double failure_time = 0.0;
  std::size_t turns = 0;
  std::size_t agents = 0;

  bool operator==(const FailureReport&) const = default;
};

struct FrameAgent {
  Vec2 position{};
  double heading = 0.0;
};

// One instant of a run as stored in the trace.
struct Frame {
  double t = 0.0;
  Vec2 ego_position{};
  double ego_heading = 0.0;
  double ego_speed = 0.0;
  std::vector<FrameAgent> agents;
};

// Incremental judge of a run. Fed frame by frame, both live and from stored traces.
class Adjudicator {
 public:
  Adjudicator(const SceneState& scene, const Route& route, const SimConfig& cfg)
      : scene_(scene), route_(route_geometry(route, scene.graph)), lane_width_(cfg.lane_width) {}

  const RouteGeometry& route() const { return route_; }
  double arc() const { return arc_; }
  const FailureReport& report() const { return report_; }
  bool terminal() const { return report_.failed; }

  void feed(const Frame& f) {
    if (first_) {
      arc_ = project_in_window(route_, f.ego_position, 0.0, 10.0).arc;
      best_ = arc_;
      prev_ = f.ego_position;
      first_ = false;
    }
    const double move = distance(prev_, f.ego_position);
    const auto proj = project_in_window(route_, f.ego_position, best_ - 10.0 - move, best_ + 10.0 + move);
    arc_ = proj.arc;
    const Vec2 tangent = tangent_at(route_.pts, route_.cum, arc_);
    const double along = (f.ego_position - prev_).dot(tangent);
    if (along < 0.0) report_.wrong_direction += -along;
    best_ = std::max(best_, arc_);
    report_.progress = std::clamp(best_ / route_.length(), 0.0, 1.0);
    prev_ = f.ego_position;
    if (report_.failed) return;

    const OrientedBox ego{f.ego_position, f.ego_heading, kEgoExtent.length, kEgoExtent.width};
    if (contact_.size() != f.agents.size()) contact_.assign(f.agents.size(), 0);
    for (std::size_t i = 0; i < f.agents.size() && i < scene_.agents.size(); ++i) {
      const auto& a = scene_.agents[i];
      const OrientedBox b{f.agents[i].position, f.agents[i].heading, a.extent.length, a.extent.width};
      const bool touching = distance(b.center, ego.center) <= b.circumradius() + ego.circumradius() && boxes_overlap(b, ego);
      if (touching && !contact_[i] && at_fault(ego, b, f.ego_speed, proj.distance)) fail(FailureCause::at_fault_collision, f.t);
      contact_[i] = touching;
    }
    if (!report_.failed && off_road(f.ego_position)) fail(FailureCause::off_road, f.t);
    if (!report_.failed && report_.wrong_direction > kWrongDirectionLimit) fail(FailureCause::wrong_direction, f.t);
  }

  // Judges progress once the horizon is reached.
  FailureReport finish(double t) {
    if (!report_.failed && report_.progress < kLowProgress) fail(FailureCause::low_progress, t);
    return report_;
  }

 private:
  void fail(FailureCause c, double t) {
    report_.failed = true;
    report_.cause = c;
    report_.failure_time = t;
  }

  bool off_road(Vec2 p) const {
    for (const auto& l : scene_.graph.lanes)
      if (point_polyline_distance(p, l.points) <= lane_width_ / 2.0 + kOffRoadMargin) return false;
    return true;
  }

  // The ego is at fault when it moves into the contact (contact centroid in the half of
  // the ego facing its motion) or when it has left its route lane.
  bool at_fault(const OrientedBox& ego, const OrientedBox& other, double speed, double route_offset) const {
    if (route_offset > lane_width_ / 2.0) return true;
    if (std::abs(speed) <= 0.1) return false;
    const auto poly = box_intersection(ego, other);
    Vec2 c = other.center;
    if (!poly.empty()) {
      c = {};
      for (const auto& q : poly) c += q;
      c = c / static_cast<double>(poly.size());
    }
    const double x = Pose{ego.center, ego.heading}.to_child(c).x;
    return speed > 0.0 ? x >= 0.0 : x <= 0.0;
  }

  const SceneState& scene_;
  RouteGeometry route_;
  double lane_width_;
  bool first_ = true;
  double arc_ = 0.0;
  double best_ = 0.0;
  Vec2 prev_{};
  std::vector<char> contact_;
  FailureReport report_;
};

namespace detail {

inline Frame frame_of(const SimState& s) {
  Frame f{s.clock, s.ego.position, s.ego.heading, s.ego.speed, {}};
  f.agents.reserve(s.agents.size());
  for (const auto& a : s.agents) f.agents.push_back({a.box.center, a.box.heading});
  return f;
}

}  // namespace detail

struct ScenarioResult {
  std::vector<TraceRow> trace;
  std::vector<SimEvent> events;
  FailureReport report;
};

// Closed-loop run to the horizon or the first terminal failure.
inline ScenarioResult run_scenario(const SceneState& scene, const Route& route, const Planner& planner, const SimConfig& cfg) {
  SimState state = init_simulation(scene, route, cfg);
  Adjudicator judge(scene, route, cfg);
  judge.feed(detail::frame_of(state));
  while (!judge.terminal() && state.clock + cfg.dt <= cfg.horizon + 1e-9) {
    const EgoAction action = planner(PlannerInput{state, cfg, judge.route(), judge.arc()});
    advance(state, action, cfg);
    judge.feed(detail::frame_of(state));
  }
  ScenarioResult out;
  out.report = judge.finish(state.clock);
  out.report.agents = scene.agents.size();
  out.report.turns = count_turns(route, scene.graph);
  out.trace = std::move(state.trace);
  out.events = std::move(state.events);
  return out;
}

// ---------------------------------------------------------------------------
// Stored traces

inline std::string_view canonical_kind(std::string_view k) {
  if (k == "ego") return "ego";
  return to_string(parse_agent_kind(k));
}

inline std::vector<TraceRow> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t,entity_id,kind,x,y,heading,speed,active")
    throw InputError("trace: unexpected header");
  std::vector<TraceRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw InputError("trace: line " + std::to_string(n) + " needs 8 fields");
    TraceRow r;
    try {
      r.t = std::stod(f[0]);
      r.entity = std::stol(f[1]);
      r.kind = canonical_kind(f[2]);
      r.position = {std::stod(f[3]), std::stod(f[4])};
      r.heading = std::stod(f[5]);
      r.speed = std::stod(f[6]);
    } catch (const std::logic_error&) {
      throw InputError("trace: bad number on line " + std::to_string(n));
    }
    r.active = f[7] == "1";
    rows.push_back(r);
  }
  return rows;
}

// Re-judges a stored run; equals the report produced while it ran.
inline FailureReport adjudicate_trace(const std::vector<TraceRow>& rows, const SceneState& scene, const Route& route,
                                      const SimConfig& cfg) {
  Adjudicator judge(scene, route, cfg);
  double last_t = 0.0;
  for (std::size_t i = 0; i < rows.size();) {
    if (rows[i].entity != 0) throw InputError("trace: frame must start with the ego row");
    Frame f{rows[i].t, rows[i].position, rows[i].heading, rows[i].speed, {}};
    std::size_t j = i + 1;
    for (; j < rows.size() && rows[j].entity != 0; ++j) f.agents.push_back({rows[j].position, rows[j].heading});
    judge.feed(f);
    last_t = f.t;
    i = j;
  }
  auto report = judge.finish(last_t);
  report.agents = scene.agents.size();
  report.turns = count_turns(route, scene.graph);
  return report;
}

}  // namespace sledge
