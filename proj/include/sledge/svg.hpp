#pragma once

#include <array>
#include <cstdio>
#include <string>

#include "sledge/raster.hpp"
#include "sledge/scene.hpp"

namespace sledge {

namespace detail {

inline constexpr double kSvgScale = 8.0;  // pixels per meter

struct SvgCanvas {
  double half;
  std::string body;

  double sx(double x) const { return (x + half) * kSvgScale; }
  double sy(double y) const { return (half - y) * kSvgScale; }

  void polyline(const Polyline& pl, const char* color, double width) {
    body += "<polyline fill=\"none\" stroke=\"";
    body += color;
    char buf[64];
    std::snprintf(buf, sizeof buf, "\" stroke-width=\"%.2f\" points=\"", width);
    body += buf;
    for (const auto& p : pl.points) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(p.x), sy(p.y));
      body += buf;
    }
    body += "\"/>\n";
    // Arrow head at the end shows travel direction.
    const Vec2 d = pl.end_direction() * 1.2;
    const Vec2 n{-d.y * 0.5, d.x * 0.5};
    const Vec2 tip = pl.end(), a = tip - d + n, b = tip - d - n;
    std::snprintf(buf, sizeof buf, "<path fill=\"%s\" d=\"M%.2f,%.2f", color, sx(tip.x), sy(tip.y));
    body += buf;
    std::snprintf(buf, sizeof buf, " L%.2f,%.2f L%.2f,%.2f Z\"/>\n", sx(a.x), sy(a.y), sx(b.x), sy(b.y));
    body += buf;
  }

  void box(const OrientedBox& box, const char* color) {
    const auto c = box.corners();
    char buf[96];
    body += "<polygon fill=\"";
    body += color;
    body += "\" fill-opacity=\"0.7\" stroke=\"black\" stroke-width=\"0.5\" points=\"";
    for (const auto& p : c) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(p.x), sy(p.y));
      body += buf;
    }
    body += "\"/>\n";
  }

  std::string finish() const {
    const double size = 2.0 * half * kSvgScale;
    char head[256];
    std::snprintf(head, sizeof head,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                  "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                  size, size, size, size);
    return head + body + "</svg>\n";
  }
};

inline const char* agent_color(AgentKind k) {
  switch (k) {
    case AgentKind::pedestrian:
      return "#e08a00";
    case AgentKind::vehicle:
      return "#1f5fbf";
    case AgentKind::static_object:
      return "#777777";
  }
  return "#777777";
}

inline constexpr std::array<const char*, kEntityTypes> kEntityColors{"#444444", "#d62728", "#2ca02c",
                                                                      "#e08a00", "#1f5fbf", "#777777"};

}  // namespace detail

// Debug rendering of a scene: lanes with direction arrows, lights, agent boxes and the ego.
inline std::string scene_svg(const SceneState& s) {
  detail::SvgCanvas cv{s.fov / 2.0, {}};
  for (const auto& l : s.graph.lanes) cv.polyline(l, "#999999", 1.5);
  for (const auto& l : s.red_lights) cv.polyline(l, "#d62728", 2.5);
  for (const auto& l : s.green_lights) cv.polyline(l, "#2ca02c", 2.5);
  for (const auto& a : s.agents) cv.box(a.box(), detail::agent_color(a.kind));
  cv.box(ego_box_at_origin(), "#9400d3");
  return cv.finish();
}

// Debug rendering of an RSI: each pixel takes the color of its highest nonzero group.
inline std::string rsi_svg(const Rsi& rsi) {
  detail::SvgCanvas cv{rsi.fov() / 2.0, {}};
  const double px = rsi.resolution() * detail::kSvgScale;
  char buf[160];
  for (int r = 0; r < rsi.height(); ++r) {
    for (int c = 0; c < rsi.width(); ++c) {
      int top = -1;
      for (std::size_t t = 0; t < kEntityTypes; ++t) {
        const auto e = static_cast<EntityType>(t);
        if (rsi.value(c, r, e).norm() > 0.0 || rsi.occupied(c, r, e)) top = static_cast<int>(t);
      }
      if (top < 0) continue;
      std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n", c * px,
                    r * px, px, px, detail::kEntityColors[static_cast<std::size_t>(top)]);
      cv.body += buf;
    }
  }
  return cv.finish();
}

}  // namespace sledge
