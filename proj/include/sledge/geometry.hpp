#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sledge/error.hpp"

namespace sledge {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{};
  }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
  double heading() const { return std::atan2(y, x); }
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

inline Vec2 unit_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Maps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline double angle_between(Vec2 a, Vec2 b) {
  return std::abs(normalize_angle(b.heading() - a.heading()));
}

// Rigid SE(2) transform. A pose describes a child frame expressed in its parent frame.
struct Pose {
  Vec2 translation{};
  double rotation = 0.0;

  Pose() = default;
  Pose(Vec2 t, double r) : translation(t), rotation(normalize_angle(r)) {}

  Vec2 to_parent(Vec2 p) const { return translation + p.rotated(rotation); }
  Vec2 to_child(Vec2 p) const { return (p - translation).rotated(-rotation); }
  Vec2 rotate_to_child(Vec2 v) const { return v.rotated(-rotation); }
  Vec2 rotate_to_parent(Vec2 v) const { return v.rotated(rotation); }

  Pose inverse() const { return Pose{(-translation).rotated(-rotation), -rotation}; }

  // (a * b) maps b's child frame into a's parent frame.
  Pose operator*(const Pose& b) const {
    return Pose{translation + b.translation.rotated(rotation), rotation + b.rotation};
  }

  bool operator==(const Pose&) const = default;
};

// ---------------------------------------------------------------------------
// Polyline helpers over plain point spans.

inline std::vector<double> cumulative_lengths(std::span<const Vec2> pts) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
  return cum;
}

inline double polyline_length(std::span<const Vec2> pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
  return len;
}

// Segment index containing arc offset s (clamped to the polyline).
inline std::size_t segment_at(std::span<const double> cum, double s) {
  if (cum.size() < 2) return 0;
  auto it = std::upper_bound(cum.begin(), cum.end(), s);
  std::size_t idx = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  return std::min(idx, cum.size() - 2);
}

inline Vec2 interpolate(std::span<const Vec2> pts, std::span<const double> cum, double s) {
  if (pts.size() == 1) return pts[0];
  if (s <= 0.0) return pts.front();
  if (s >= cum.back()) return pts.back();
  const std::size_t i = segment_at(cum, s);
  const double seg = cum[i + 1] - cum[i];
  if (seg <= 0.0) return pts[i];
  const double t = (s - cum[i]) / seg;
  return pts[i] + (pts[i + 1] - pts[i]) * t;
}

inline Vec2 tangent_at(std::span<const Vec2> pts, std::span<const double> cum, double s) {
  std::size_t i = segment_at(cum, s);
  // Skip zero-length segments.
  while (i + 2 < pts.size() && cum[i + 1] - cum[i] <= 0.0) ++i;
  return (pts[i + 1] - pts[i]).normalized();
}

// Uniform arc-length resampling; the first and last input points are kept exactly.
inline std::vector<Vec2> resample(std::span<const Vec2> pts, std::size_t n) {
  if (pts.size() < 2) throw InputError("resample: need at least 2 points");
  if (n < 2) throw InputError("resample: need at least 2 output points");
  const auto cum = cumulative_lengths(pts);
  const double total = cum.back();
  if (!(total > 1e-12)) throw InputError("resample: degenerate zero-length polyline");
  std::vector<Vec2> out;
  out.reserve(n);
  out.push_back(pts.front());
  for (std::size_t k = 1; k + 1 < n; ++k) {
    out.push_back(interpolate(pts, cum, total * static_cast<double>(k) / static_cast<double>(n - 1)));
  }
  out.push_back(pts.back());
  return out;
}

struct SegmentProjection {
  double distance = 0.0;  // Euclidean distance to the foot point
  double t = 0.0;         // parameter of the foot point on the segment, in [0,1]
  Vec2 foot{};
};

inline SegmentProjection project_onto_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squared_norm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 foot = a + ab * t;
  return {distance(p, foot), t, foot};
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) { return project_onto_segment(p, a, b).distance; }

struct PolylineProjection {
  double distance = 0.0;
  double arc = 0.0;  // arc offset of the foot point
  std::size_t segment = 0;
  Vec2 foot{};
};

inline PolylineProjection project_onto_polyline(Vec2 p, std::span<const Vec2> pts, std::span<const double> cum) {
  PolylineProjection best{std::numeric_limits<double>::infinity(), 0.0, 0, pts.empty() ? Vec2{} : pts[0]};
  if (pts.size() == 1) {
    best.distance = distance(p, pts[0]);
    return best;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto sp = project_onto_segment(p, pts[i], pts[i + 1]);
    if (sp.distance < best.distance) {
      best = {sp.distance, cum[i] + sp.t * (cum[i + 1] - cum[i]), i, sp.foot};
    }
  }
  return best;
}

inline double point_polyline_distance(Vec2 p, std::span<const Vec2> pts) {
  double best = std::numeric_limits<double>::infinity();
  if (pts.size() == 1) return distance(p, pts[0]);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) best = std::min(best, point_segment_distance(p, pts[i], pts[i + 1]));
  return best;
}

// ---------------------------------------------------------------------------
// Interval clipping of polylines.

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Parameter interval of segment a->b inside the axis-aligned square |x|,|y| <= half.
inline std::optional<Interval> clip_segment_to_square(Vec2 a, Vec2 b, double half) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  const std::array<double, 4> p{-d.x, d.x, -d.y, d.y};
  const std::array<double, 4> q{a.x + half, half - a.x, a.y + half, half - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
  }
  if (t0 > t1) return std::nullopt;
  return Interval{t0, t1};
}

// Removes `cut` from a sorted list of disjoint intervals.
inline std::vector<Interval> subtract_interval(const std::vector<Interval>& in, Interval cut) {
  std::vector<Interval> out;
  for (const auto& iv : in) {
    if (cut.hi <= iv.lo || cut.lo >= iv.hi) {
      out.push_back(iv);
      continue;
    }
    if (cut.lo > iv.lo) out.push_back({iv.lo, cut.lo});
    if (cut.hi < iv.hi) out.push_back({cut.hi, iv.hi});
  }
  return out;
}

// Splits a polyline into maximal runs kept by `keep`, which returns the sorted, disjoint
// parameter intervals of a segment that survive. Runs continue across vertices when the
// kept interval of one segment ends at t=1 and the next begins at t=0.
using SegmentFilter = std::function<std::vector<Interval>(Vec2, Vec2)>;

inline std::vector<std::vector<Vec2>> polyline_runs(std::span<const Vec2> pts, const SegmentFilter& keep) {
  std::vector<std::vector<Vec2>> runs;
  std::vector<Vec2> current;
  bool open = false;
  constexpr double kEps = 1e-12;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[i + 1];
    auto intervals = keep(a, b);
    if (intervals.empty()) {
      if (open) runs.push_back(std::move(current));
      current.clear();
      open = false;
      continue;
    }
    for (std::size_t k = 0; k < intervals.size(); ++k) {
      const auto iv = intervals[k];
      const Vec2 pa = iv.lo <= kEps ? a : a + (b - a) * iv.lo;
      const Vec2 pb = iv.hi >= 1.0 - kEps ? b : a + (b - a) * iv.hi;
      const bool continues = open && k == 0 && iv.lo <= kEps;
      if (!continues) {
        if (open) runs.push_back(std::move(current));
        current.clear();
        current.push_back(pa);
      }
      current.push_back(pb);
      open = true;
      if (iv.hi < 1.0 - kEps) {
        runs.push_back(std::move(current));
        current.clear();
        open = false;
      }
    }
  }
  if (open) runs.push_back(std::move(current));
  // Drop repeated vertices produced by touching intervals.
  for (auto& run : runs) {
    run.erase(std::unique(run.begin(), run.end(), [](Vec2 p, Vec2 q) { return distance(p, q) <= 1e-12; }), run.end());
  }
  std::erase_if(runs, [](const auto& r) { return r.size() < 2; });
  return runs;
}

inline std::vector<std::vector<Vec2>> clip_polyline_to_square(std::span<const Vec2> pts, double half) {
  return polyline_runs(pts, [half](Vec2 a, Vec2 b) {
    std::vector<Interval> out;
    if (auto iv = clip_segment_to_square(a, b, half); iv && iv->hi - iv->lo > 0.0) out.push_back(*iv);
    return out;
  });
}

inline bool inside_square(Vec2 p, double half, double tol = 0.0) {
  return std::abs(p.x) <= half + tol && std::abs(p.y) <= half + tol;
}

// ---------------------------------------------------------------------------
// Oriented boxes.

struct OrientedBox {
  Vec2 center{};
  double heading = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 f = unit_vector(heading) * (length / 2.0);
    const Vec2 l = unit_vector(heading + kPi / 2.0) * (width / 2.0);
    return {center + f + l, center - f + l, center - f - l, center + f - l};
  }

  bool contains(Vec2 p, double tol = 0.0) const {
    const Vec2 d = (p - center).rotated(-heading);
    return std::abs(d.x) <= length / 2.0 + tol && std::abs(d.y) <= width / 2.0 + tol;
  }

  double circumradius() const { return 0.5 * std::hypot(length, width); }
};

// Separating-axis test for two rectangles.
inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  if (distance(a.center, b.center) > a.circumradius() + b.circumradius()) return false;
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes{unit_vector(a.heading), unit_vector(a.heading + kPi / 2.0), unit_vector(b.heading),
                                 unit_vector(b.heading + kPi / 2.0)};
  for (const Vec2 axis : axes) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (const Vec2 c : ca) {
      amin = std::min(amin, c.dot(axis));
      amax = std::max(amax, c.dot(axis));
    }
    for (const Vec2 c : cb) {
      bmin = std::min(bmin, c.dot(axis));
      bmax = std::max(bmax, c.dot(axis));
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

// Intersection polygon of two boxes (Sutherland-Hodgman); empty when disjoint.
inline std::vector<Vec2> box_intersection(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  std::vector<Vec2> poly(ca.begin(), ca.end());
  const auto cb = b.corners();  // counter-clockwise
  for (std::size_t e = 0; e < 4 && !poly.empty(); ++e) {
    const Vec2 p0 = cb[e];
    const Vec2 p1 = cb[(e + 1) % 4];
    auto inside = [&](Vec2 q) { return (p1 - p0).cross(q - p0) >= 0.0; };
    std::vector<Vec2> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 cur = poly[i];
      const Vec2 prev = poly[(i + poly.size() - 1) % poly.size()];
      const bool in_cur = inside(cur);
      const bool in_prev = inside(prev);
      if (in_cur != in_prev) {
        const Vec2 d = cur - prev;
        const double denom = (p1 - p0).cross(d);
        if (denom != 0.0) {
          const double t = (p1 - p0).cross(p0 - prev) / denom;
          next.push_back(prev + d * t);
        }
      }
      if (in_cur) next.push_back(cur);
    }
    poly = std::move(next);
  }
  return poly;
}

}  // namespace sledge
