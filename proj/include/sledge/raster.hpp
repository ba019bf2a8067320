#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/scene.hpp"

namespace sledge {

// Entity groups in channel order; each owns two consecutive channels.
enum class EntityType : std::uint8_t { lanes = 0, red_lights, green_lights, pedestrians, vehicles, static_objects };

inline constexpr std::size_t kEntityTypes = 6;
inline constexpr std::size_t kRsiChannels = 2 * kEntityTypes;

struct RasterConfig {
  int width = 256;
  int height = 256;
  double fov = kDefaultFov;
  int line_thickness = 1;

  double resolution() const { return fov / static_cast<double>(width); }
};

// Rasterized state image. Data is row-major with the 12 channels interleaved per pixel.
// Row 0 is the +y edge of the field of view and column 0 the -x edge.
class Rsi {
 public:
  Rsi() = default;
  Rsi(int width, int height, double resolution)
      : width_(width),
        height_(height),
        resolution_(resolution),
        data_(static_cast<std::size_t>(width) * height * kRsiChannels, 0.0f),
        occupancy_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  double fov() const { return resolution_ * width_; }

  bool in_bounds(int col, int row) const { return col >= 0 && row >= 0 && col < width_ && row < height_; }

  Vec2 value(int col, int row, EntityType t) const {
    const auto base = index(col, row) + 2 * static_cast<std::size_t>(t);
    return {data_[base], data_[base + 1]};
  }
  void set(int col, int row, EntityType t, Vec2 v) {
    const auto base = index(col, row) + 2 * static_cast<std::size_t>(t);
    data_[base] = static_cast<float>(v.x);
    data_[base + 1] = static_cast<float>(v.y);
    occupancy_[pixel(col, row)] |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
  }

  // Sidecar occupancy bit per entity type. Only populated by rasterize, never serialized,
  // and used only to tell stationary agents apart from background in tests.
  bool occupied(int col, int row, EntityType t) const {
    return (occupancy_[pixel(col, row)] >> static_cast<unsigned>(t)) & 1u;
  }

  Vec2 pixel_center(int col, int row) const {
    const double half = fov() / 2.0;
    return {-half + (col + 0.5) * resolution_, half - (row + 0.5) * resolution_};
  }
  // Pixel containing a metric point (may be out of bounds).
  std::array<int, 2> pixel_of(Vec2 p) const {
    const double half = fov() / 2.0;
    return {static_cast<int>(std::floor((p.x + half) / resolution_)),
            static_cast<int>(std::floor((half - p.y) / resolution_))};
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool operator==(const Rsi& o) const {
    return width_ == o.width_ && height_ == o.height_ && resolution_ == o.resolution_ && data_ == o.data_;
  }

 private:
  std::size_t pixel(int col, int row) const { return static_cast<std::size_t>(row) * width_ + col; }
  std::size_t index(int col, int row) const { return pixel(col, row) * kRsiChannels; }

  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.0;
  std::vector<float> data_;
  std::vector<std::uint8_t> occupancy_;
};

namespace detail {

inline void stamp(Rsi& img, int col, int row, int thickness, EntityType t, Vec2 v) {
  const int lo = -(thickness - 1) / 2;
  const int hi = thickness / 2;
  for (int dr = lo; dr <= hi; ++dr)
    for (int dc = lo; dc <= hi; ++dc)
      if (img.in_bounds(col + dc, row + dr)) img.set(col + dc, row + dr, t, v);
}

// Bresenham traversal between two pixels.
inline void draw_line(Rsi& img, std::array<int, 2> a, std::array<int, 2> b, int thickness, EntityType t, Vec2 v) {
  int x0 = a[0], y0 = a[1];
  const int x1 = b[0], y1 = b[1];
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    stamp(img, x0, y0, thickness, t, v);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

inline void draw_polyline(Rsi& img, const Polyline& pl, int thickness, EntityType t) {
  for (std::size_t i = 0; i + 1 < kPolylinePoints; ++i) {
    const Vec2 d = pl.points[i + 1] - pl.points[i];
    if (d.squared_norm() <= 0.0) continue;
    draw_line(img, img.pixel_of(pl.points[i]), img.pixel_of(pl.points[i + 1]), thickness, t, d.normalized());
  }
}

inline void fill_box(Rsi& img, const OrientedBox& box, EntityType t, Vec2 v) {
  const double r = box.circumradius();
  const auto lo = img.pixel_of(box.center + Vec2{-r, r});
  const auto hi = img.pixel_of(box.center + Vec2{r, -r});
  bool any = false;
  for (int row = std::max(lo[1], 0); row <= std::min(hi[1], img.height() - 1); ++row) {
    for (int col = std::max(lo[0], 0); col <= std::min(hi[0], img.width() - 1); ++col) {
      if (box.contains(img.pixel_center(col, row))) {
        img.set(col, row, t, v);
        any = true;
      }
    }
  }
  // Boxes smaller than a pixel still mark the pixel holding their center.
  if (!any) {
    const auto c = img.pixel_of(box.center);
    if (img.in_bounds(c[0], c[1])) img.set(c[0], c[1], t, v);
  }
}

inline EntityType entity_of(AgentKind k) {
  switch (k) {
    case AgentKind::pedestrian:
      return EntityType::pedestrians;
    case AgentKind::vehicle:
      return EntityType::vehicles;
    case AgentKind::static_object:
      return EntityType::static_objects;
  }
  return EntityType::static_objects;
}

}  // namespace detail

// Encodes a scene into the 12-channel image. Polylines store unit successor directions,
// pedestrians and vehicles their velocity, static objects their orientation. The ego is
// drawn last as an extra vehicle at the origin carrying the ego velocity.
inline Rsi rasterize(const SceneState& scene, const RasterConfig& cfg = {}) {
  if (cfg.width != cfg.height || cfg.width <= 0) throw InputError("rasterize: raster must be square");
  if (!(cfg.fov > 0.0)) throw InputError("rasterize: fov must be positive");
  Rsi img(cfg.width, cfg.height, cfg.resolution());
  const int th = std::max(1, cfg.line_thickness);
  for (const auto& l : scene.graph.lanes) detail::draw_polyline(img, l, th, EntityType::lanes);
  for (const auto& l : scene.red_lights) detail::draw_polyline(img, l, th, EntityType::red_lights);
  for (const auto& l : scene.green_lights) detail::draw_polyline(img, l, th, EntityType::green_lights);
  for (const auto& a : scene.agents) {
    const Vec2 v = a.kind == AgentKind::static_object ? unit_vector(a.heading) : a.velocity();
    detail::fill_box(img, a.box(), detail::entity_of(a.kind), v);
  }
  detail::fill_box(img, ego_box_at_origin(), EntityType::vehicles, scene.ego_velocity);
  return img;
}

// ---------------------------------------------------------------------------
// Binary form: "RSI1", u32 width, u32 height, u32 channels, f32 resolution, f32 data.

inline std::string encode_rsi(const Rsi& img) {
  std::string out = "RSI1";
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto put_f32 = [&](float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  };
  put_u32(static_cast<std::uint32_t>(img.width()));
  put_u32(static_cast<std::uint32_t>(img.height()));
  put_u32(static_cast<std::uint32_t>(kRsiChannels));
  put_f32(static_cast<float>(img.resolution()));
  out.reserve(out.size() + img.data().size() * 4);
  for (float f : img.data()) put_f32(f);
  return out;
}

inline Rsi decode_rsi(std::string_view bytes) {
  if (bytes.size() < 20 || bytes.substr(0, 4) != "RSI1") throw InputError("rsi: bad magic");
  std::size_t pos = 4;
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  };
  auto get_f32 = [&]() {
    const std::uint32_t bits = get_u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  };
  const auto w = get_u32();
  const auto h = get_u32();
  const auto c = get_u32();
  const float res = get_f32();
  if (c != kRsiChannels) throw InputError("rsi: expected 12 channels");
  if (w == 0 || h == 0 || w > 16384 || h > 16384 || !(res > 0.0f)) throw InputError("rsi: bad header");
  const std::size_t count = static_cast<std::size_t>(w) * h * c;
  if (bytes.size() != 20 + count * 4) throw InputError("rsi: payload size mismatch");
  // Keep the resolution at float precision so re-encoding is byte-identical.
  Rsi img(static_cast<int>(w), static_cast<int>(h), static_cast<double>(res));
  for (std::size_t i = 0; i < count; ++i) img.data()[i] = get_f32();
  return img;
}

}  // namespace sledge
