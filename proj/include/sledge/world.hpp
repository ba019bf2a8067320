#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/scene.hpp"

namespace sledge {

inline constexpr double kLaneWidth = 3.7;
inline constexpr double kHalfLane = kLaneWidth / 2.0;
inline constexpr double kIntersectionHalfSize = 12.0;
inline constexpr double kArmSegment = 40.0;

enum class Layout { straight, curve, intersection, grid };

inline std::string_view to_string(Layout l) {
  switch (l) {
    case Layout::straight:
      return "straight";
    case Layout::curve:
      return "curve";
    case Layout::intersection:
      return "intersection";
    case Layout::grid:
      return "grid";
  }
  return "straight";
}

inline Layout parse_layout(std::string_view s) {
  if (s == "straight") return Layout::straight;
  if (s == "curve") return Layout::curve;
  if (s == "intersection") return Layout::intersection;
  if (s == "grid") return Layout::grid;
  throw InputError("unknown layout: " + std::string(s));
}

struct GenConfig {
  std::uint64_t seed = 0;
  Layout layout = Layout::straight;
  int min_lanes = 1;  // lanes per travel direction (straight and curve layouts)
  int max_lanes = 2;
  double agent_density = 3.0;  // agents per 100 m of lane
  double light_probability = 0.5;
  double fov = kDefaultFov;
};

inline void validate_config(const GenConfig& c) {
  if (c.min_lanes < 1 || c.max_lanes < c.min_lanes || c.max_lanes > 4)
    throw InputError("gen config: lane_count range must satisfy 1 <= min <= max <= 4");
  if (!(c.agent_density >= 0.0) || !std::isfinite(c.agent_density)) throw InputError("gen config: density must be >= 0");
  if (!(c.light_probability >= 0.0 && c.light_probability <= 1.0))
    throw InputError("gen config: light probability must lie in [0, 1]");
  if (!(c.fov > 0.0) || !std::isfinite(c.fov)) throw InputError("gen config: fov must be positive");
}

// ---------------------------------------------------------------------------
// Seeded randomness. Values are derived with explicit formulas so outputs do not depend
// on the standard library's distribution implementations.

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }  // inclusive
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Unbounded procedural road network, expressed in the frame of the first tile: the origin
// lies on an eastbound lane heading +x. Right-hand traffic.

struct WorldLane {
  std::vector<Vec2> points;
  std::vector<double> cum;
  std::vector<std::size_t> successors;
  int intersection = -1;  // connectors only
  int axis = 0;           // 0: approach along x, 1: along y

  double length() const { return cum.back(); }
};

struct World {
  std::vector<WorldLane> lanes;
  // Per intersection: -1 unsignalized, otherwise the axis holding the green phase.
  std::vector<int> green_axis;
};

namespace detail {

inline Vec2 right_of(Vec2 d) { return {d.y, -d.x}; }

struct WorldBuilder {
  World world;

  std::size_t add(std::vector<Vec2> pts, int intersection = -1, int axis = 0) {
    WorldLane l;
    l.cum = cumulative_lengths(pts);
    l.points = std::move(pts);
    l.intersection = intersection;
    l.axis = axis;
    world.lanes.push_back(std::move(l));
    return world.lanes.size() - 1;
  }

  // Links every lane end to every lane start at the bitwise identical point.
  void link_by_endpoints() {
    std::map<std::pair<double, double>, std::vector<std::size_t>> starts;
    for (std::size_t i = 0; i < world.lanes.size(); ++i) {
      const Vec2 s = world.lanes[i].points.front();
      starts[{s.x, s.y}].push_back(i);
    }
    for (auto& l : world.lanes) {
      const Vec2 e = l.points.back();
      auto it = starts.find({e.x, e.y});
      if (it != starts.end()) l.successors = it->second;
    }
  }
};

// Straight run from a to b split into pieces no longer than `piece`, sharing exact endpoints.
inline std::vector<std::vector<Vec2>> split_straight(Vec2 a, Vec2 b, double piece) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / piece - 1e-9)));
  std::vector<Vec2> cuts{a};
  for (int k = 1; k < n; ++k) cuts.push_back(a + (b - a) * (static_cast<double>(k) / n));
  cuts.push_back(b);
  std::vector<std::vector<Vec2>> out;
  for (int k = 0; k < n; ++k) out.push_back({cuts[k], cuts[k + 1]});
  return out;
}

inline std::vector<Vec2> quarter_arc(Vec2 from, Vec2 to, Vec2 center, double sweep) {
  const double r = distance(from, center);
  const double a0 = (from - center).heading();
  const int n = std::max(8, static_cast<int>(std::ceil(std::abs(sweep) * r / 0.5)));
  std::vector<Vec2> pts{from};
  for (int k = 1; k < n; ++k) pts.push_back(center + unit_vector(a0 + sweep * k / n) * r);
  pts.push_back(to);
  return pts;
}

inline void build_straight(WorldBuilder& b, Rng& rng, int lanes, double radius) {
  const double offset = rng.uniform(-kArmSegment, 0.0);
  // Breakpoints sit at offset + i * kArmSegment for integer i, independent of `radius`.
  const int m = static_cast<int>(std::ceil((radius + kArmSegment) / kArmSegment));
  for (int k = 0; k < lanes; ++k) {
    for (int dir = 0; dir < 2; ++dir) {
      const double y = dir == 0 ? -kLaneWidth * k : kLaneWidth * (k + 1);
      for (int i = -m; i < m; ++i) {
        const Vec2 p{offset + i * kArmSegment, y}, q{offset + (i + 1) * kArmSegment, y};
        if (dir == 0) {
          b.add({p, q});
        } else {
          b.add({q, p});
        }
      }
    }
  }
  b.link_by_endpoints();
}

struct RefSample {
  Vec2 p;
  Vec2 left;  // unit left normal
};

// Meandering reference line made of straights and +-45 degree arcs; heading stays within
// +-45 degrees of +x so the road never folds back on itself.
inline std::vector<std::vector<RefSample>> curve_pieces(Rng& rng, double min_radius, double reach, double start_x) {
  std::vector<std::vector<RefSample>> pieces;
  Vec2 pos{start_x, 0.0};
  double heading = 0.0;
  bool straight = true;
  double travelled = 0.0;
  while (travelled < reach) {
    std::vector<RefSample> piece;
    if (straight) {
      const double len = rng.uniform(20.0, 40.0);
      const Vec2 d = unit_vector(heading);
      const int n = std::max(2, static_cast<int>(std::ceil(len / 5.0)) + 1);
      for (int k = 0; k < n; ++k) piece.push_back({pos + d * (len * k / (n - 1)), d.rotated(kPi / 2)});
      pos = pos + d * len;
      travelled += len;
    } else {
      double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      if (heading > 1e-9) sign = -1.0;
      if (heading < -1e-9) sign = 1.0;
      const double r = rng.uniform(min_radius, min_radius + 20.0);
      const double sweep = sign * kPi / 4.0;
      const Vec2 center = pos + unit_vector(heading + sign * kPi / 2.0) * r;
      const double a0 = (pos - center).heading();
      const int n = std::max(8, static_cast<int>(std::ceil(std::abs(sweep) * r / 0.5))) + 1;
      for (int k = 0; k < n; ++k) {
        const double a = a0 + sweep * k / (n - 1);
        const Vec2 p = k == 0 ? pos : center + unit_vector(a) * r;
        piece.push_back({p, unit_vector(heading + sweep * k / (n - 1)).rotated(kPi / 2)});
      }
      pos = piece.back().p;
      heading = normalize_angle(heading + sweep);
      travelled += std::abs(sweep) * r;
    }
    pieces.push_back(std::move(piece));
    straight = !straight;
  }
  return pieces;
}

inline void build_curve(WorldBuilder& b, Rng& rng, int lanes, double radius) {
  const double max_offset = kLaneWidth * (2 * lanes - 1);
  const double min_radius = 10.0 + max_offset + 2.0;
  // The first piece is straight and starts behind the origin; a mirrored chain covers -x.
  const double back = rng.uniform(10.0, 20.0);
  auto fwd = curve_pieces(rng, min_radius, radius * 1.5 + 60.0, -back);
  auto rev = curve_pieces(rng, min_radius, radius * 1.5 + 60.0, back);
  std::vector<std::vector<RefSample>> pieces;
  for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
    std::vector<RefSample> p;
    for (auto s = it->rbegin(); s != it->rend(); ++s) p.push_back({{-s->p.x, -s->p.y}, s->left});
    pieces.push_back(std::move(p));
  }
  // The mirrored chain ends at (-back, 0), where the forward chain starts.
  pieces.back().back().p = fwd.front().front().p;
  for (auto& p : fwd) pieces.push_back(std::move(p));
  // Shared joints: every piece starts exactly where the previous one ended.
  for (std::size_t i = 1; i < pieces.size(); ++i) pieces[i].front().p = pieces[i - 1].back().p;

  for (int k = 0; k < lanes; ++k) {
    for (int dir = 0; dir < 2; ++dir) {
      const double o = dir == 0 ? -kLaneWidth * k : kLaneWidth * (k + 1);
      std::vector<std::size_t> ids;
      for (const auto& piece : pieces) {
        std::vector<Vec2> pts;
        for (const auto& s : piece) pts.push_back(s.p + s.left * o);
        if (dir == 1) std::reverse(pts.begin(), pts.end());
        ids.push_back(b.add(std::move(pts)));
      }
      // Offsetting the shared joints yields identical points on both sides.
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        auto& a = b.world.lanes[ids[dir == 0 ? i : i + 1]];
        auto& c = b.world.lanes[ids[dir == 0 ? i + 1 : i]];
        c.points.front() = a.points.back();
        c.cum = cumulative_lengths(c.points);
        a.successors.push_back(ids[dir == 0 ? i + 1 : i]);
      }
    }
  }
}

// Orthogonal road network with one lane per direction. Intersections sit at
// (xs[i], ys[j]); arms beyond the outermost intersections run out to `radius`.
inline void build_grid(WorldBuilder& b, std::uint64_t light_seed, const std::vector<double>& xs, const std::vector<double>& ys,
                       double light_probability, double radius) {
  const double h = kIntersectionHalfSize;
  const std::array<Vec2, 4> dirs{Vec2{1, 0}, Vec2{-1, 0}, Vec2{0, 1}, Vec2{0, -1}};
  auto entry = [&](Vec2 c, Vec2 d) { return c - d * h + right_of(d) * kHalfLane; };
  auto exit = [&](Vec2 c, Vec2 d) { return c + d * h + right_of(d) * kHalfLane; };
  const double far = radius + kArmSegment;

  // Outer arms are whole multiples of kArmSegment anchored at the intersection, so
  // segment breakpoints near the origin do not depend on `radius`.
  auto arm_start = [&](Vec2 anchor, Vec2 d) {
    return anchor - d * (kArmSegment * std::ceil(std::max(0.0, far + anchor.dot(d)) / kArmSegment));
  };
  auto arm_end = [&](Vec2 anchor, Vec2 d) {
    return anchor + d * (kArmSegment * std::ceil(std::max(0.0, far - anchor.dot(d)) / kArmSegment));
  };
  auto add_road = [&](Vec2 a, Vec2 c) {
    for (auto& pts : split_straight(a, c, kArmSegment)) b.add(std::move(pts));
  };
  // Horizontal roads.
  for (double y : ys) {
    for (int dir = 0; dir < 2; ++dir) {
      const Vec2 d = dirs[dir];
      // Intersections ordered along travel.
      std::vector<double> order = xs;
      if (dir == 1) std::reverse(order.begin(), order.end());
      Vec2 from = arm_start(entry({order.front(), y}, d), d);
      for (double x : order) {
        add_road(from, entry({x, y}, d));
        from = exit({x, y}, d);
      }
      add_road(from, arm_end(from, d));
    }
  }
  // Vertical roads.
  for (double x : xs) {
    for (int dir = 2; dir < 4; ++dir) {
      const Vec2 d = dirs[dir];
      std::vector<double> order = ys;
      if (dir == 3) std::reverse(order.begin(), order.end());
      Vec2 from = arm_start(entry({x, order.front()}, d), d);
      for (double y : order) {
        add_road(from, entry({x, y}, d));
        from = exit({x, y}, d);
      }
      add_road(from, arm_end(from, d));
    }
  }
  // Connectors.
  for (double y : ys) {
    for (double x : xs) {
      const int id = static_cast<int>(b.world.green_axis.size());
      // Per-intersection stream keyed by grid position keeps lights independent of `radius`.
      const auto key = static_cast<std::uint64_t>(std::llround(x) * 100003 + std::llround(y));
      Rng light(mix_seed(light_seed, key));
      b.world.green_axis.push_back(light.bernoulli(light_probability) ? light.integer(0, 1) : -1);
      const Vec2 c{x, y};
      for (int i = 0; i < 4; ++i) {
        const Vec2 d = dirs[i];
        const int axis = i < 2 ? 0 : 1;
        const Vec2 e = entry(c, d);
        b.add({e, exit(c, d)}, id, axis);
        const Vec2 rd = right_of(d);
        b.add(quarter_arc(e, exit(c, rd), e + rd * (h - kHalfLane), -kPi / 2.0), id, axis);
        b.add(quarter_arc(e, exit(c, -1.0 * rd), e - rd * (h + kHalfLane), kPi / 2.0), id, axis);
      }
    }
  }
  b.link_by_endpoints();
}

}  // namespace detail

// Builds the road network covering at least a disk of `radius` meters around the origin.
inline World build_world(const GenConfig& cfg, double radius) {
  validate_config(cfg);
  Rng rng(mix_seed(cfg.seed, 1));
  detail::WorldBuilder b;
  const int lanes = rng.integer(cfg.min_lanes, cfg.max_lanes);
  const double h = kIntersectionHalfSize;
  switch (cfg.layout) {
    case Layout::straight:
      detail::build_straight(b, rng, lanes, radius);
      break;
    case Layout::curve:
      detail::build_curve(b, rng, lanes, radius);
      break;
    case Layout::intersection:
      detail::build_grid(b, mix_seed(cfg.seed, 3), {rng.uniform(h + 4.0, kDefaultFov / 2.0 - h - 1.0)}, {kHalfLane}, cfg.light_probability, radius);
      break;
    case Layout::grid: {
      const double block = rng.uniform(56.0, 80.0);
      const double x0 = rng.uniform(h + 6.0, block - h - 6.0);
      const int n = static_cast<int>(std::ceil(radius / block)) + 1;
      std::vector<double> xs, ys;
      for (int k = -n; k <= n; ++k) {
        xs.push_back(x0 + k * block);
        ys.push_back(kHalfLane + k * block);
      }
      detail::build_grid(b, mix_seed(cfg.seed, 3), xs, ys, cfg.light_probability, radius);
      break;
    }
  }
  return std::move(b.world);
}

}  // namespace sledge
