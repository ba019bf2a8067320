#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "sledge/lanegraph.hpp"
#include "sledge/raster.hpp"
#include "sledge/scene.hpp"

namespace sledge {

struct SkeletonOptions {
  double prune_length = 3.0;  // meters; shorter traced paths are dropped
  double value_epsilon = 1e-6;
};

namespace detail {

// 8-neighborhood in Zhang-Suen order P2..P9: N, NE, E, SE, S, SW, W, NW.
inline constexpr std::array<std::array<int, 2>, 8> kRing{{{0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

class BinaryImage {
 public:
  BinaryImage(int w, int h) : w_(w), h_(h), bits_(static_cast<std::size_t>(w) * h, 0) {}
  int width() const { return w_; }
  int height() const { return h_; }
  bool get(int c, int r) const { return c >= 0 && r >= 0 && c < w_ && r < h_ && bits_[idx(c, r)]; }
  void set(int c, int r, bool v) { bits_[idx(c, r)] = v ? 1 : 0; }
  std::size_t idx(int c, int r) const { return static_cast<std::size_t>(r) * w_ + c; }

  std::array<bool, 8> ring(int c, int r) const {
    std::array<bool, 8> n{};
    for (int k = 0; k < 8; ++k) n[k] = get(c + kRing[k][0], r + kRing[k][1]);
    return n;
  }
  int count(int c, int r) const {
    int n = 0;
    for (bool b : ring(c, r)) n += b;
    return n;
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> bits_;
};

inline void zhang_suen_thin(BinaryImage& img) {
  bool changed = true;
  std::vector<std::array<int, 2>> to_clear;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
          if (!img.get(c, r)) continue;
          const auto p = img.ring(c, r);
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[k];
            a += (!p[k] && p[(k + 1) % 8]);
          }
          if (b < 2 || b > 6 || a != 1) continue;
          // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
          const bool ok = pass == 0 ? (!(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6]))
                                    : (!(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6]));
          if (ok) to_clear.push_back({c, r});
        }
      }
      for (auto [c, r] : to_clear) img.set(c, r, false);
      changed = changed || !to_clear.empty();
    }
  }
}

// Number of 8-connected components among the set neighbors of a pixel.
inline int neighbor_components(const std::array<bool, 8>& p) {
  std::array<int, 8> label{};
  label.fill(-1);
  int comps = 0;
  for (int s = 0; s < 8; ++s) {
    if (!p[s] || label[s] >= 0) continue;
    std::array<int, 8> stack{};
    int top = 0;
    stack[top++] = s;
    label[s] = comps;
    while (top) {
      const int u = stack[--top];
      for (int v = 0; v < 8; ++v) {
        if (!p[v] || label[v] >= 0) continue;
        const int dc = std::abs(kRing[u][0] - kRing[v][0]);
        const int dr = std::abs(kRing[u][1] - kRing[v][1]);
        if (dc <= 1 && dr <= 1) {
          label[v] = comps;
          stack[top++] = v;
        }
      }
    }
    ++comps;
  }
  return comps;
}

// Removes corner pixels of staircases left by thinning (a pixel with two orthogonal
// 4-neighbors whose removal keeps its neighborhood connected).
inline void remove_staircases(BinaryImage& img) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < img.height(); ++r) {
      for (int c = 0; c < img.width(); ++c) {
        if (!img.get(c, r)) continue;
        const auto p = img.ring(c, r);
        int b = 0;
        for (bool v : p) b += v;
        if (b < 2) continue;
        const bool corner = (p[0] && p[2]) || (p[2] && p[4]) || (p[4] && p[6]) || (p[6] && p[0]);
        if (!corner || neighbor_components(p) != 1) continue;
        img.set(c, r, false);
        changed = true;
      }
    }
  }
}

struct PixelPath {
  std::vector<std::array<int, 2>> pixels;
};

inline std::vector<PixelPath> trace_paths(const BinaryImage& img) {
  const int w = img.width(), h = img.height();
  std::vector<std::uint8_t> used(static_cast<std::size_t>(w) * h, 0);  // per-direction edge bits
  auto mark = [&](int c, int r, int k) {
    used[img.idx(c, r)] |= static_cast<std::uint8_t>(1u << k);
    const int c2 = c + kRing[k][0], r2 = r + kRing[k][1];
    used[img.idx(c2, r2)] |= static_cast<std::uint8_t>(1u << ((k + 4) % 8));
  };
  auto is_used = [&](int c, int r, int k) { return (used[img.idx(c, r)] >> k) & 1u; };
  auto is_node = [&](int c, int r) { return img.count(c, r) != 2; };

  auto walk = [&](int c0, int r0, int k0) {
    PixelPath path;
    path.pixels.push_back({c0, r0});
    mark(c0, r0, k0);
    int c = c0 + kRing[k0][0], r = r0 + kRing[k0][1];
    path.pixels.push_back({c, r});
    while (!is_node(c, r) && !(c == c0 && r == r0)) {
      int next = -1;
      for (int k = 0; k < 8; ++k) {
        if (img.get(c + kRing[k][0], r + kRing[k][1]) && !is_used(c, r, k)) {
          next = k;
          break;
        }
      }
      if (next < 0) break;
      mark(c, r, next);
      c += kRing[next][0];
      r += kRing[next][1];
      path.pixels.push_back({c, r});
    }
    return path;
  };

  std::vector<PixelPath> paths;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.get(c, r) || !is_node(c, r)) continue;
      for (int k = 0; k < 8; ++k) {
        if (img.get(c + kRing[k][0], r + kRing[k][1]) && !is_used(c, r, k)) paths.push_back(walk(c, r, k));
      }
    }
  }
  // Closed loops without any node pixel.
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.get(c, r) || used[img.idx(c, r)]) continue;
      for (int k = 0; k < 8; ++k) {
        if (img.get(c + kRing[k][0], r + kRing[k][1])) {
          paths.push_back(walk(c, r, k));
          break;
        }
      }
    }
  }
  return paths;
}

}  // namespace detail

// Raster-to-vector baseline: binarize one polyline channel group, thin it to a one-pixel
// skeleton, split the skeleton at junctions and tips, orient every traced path by a
// majority vote of the stored direction vectors and resample it to 20 points.
inline std::vector<Polyline> skeleton_vectorize(const Rsi& rsi, EntityType group, const SkeletonOptions& opt = {}) {
  if (group != EntityType::lanes && group != EntityType::red_lights && group != EntityType::green_lights) {
    throw InputError("skeleton_vectorize: channel group must hold polylines");
  }
  detail::BinaryImage mask(rsi.width(), rsi.height());
  bool any = false;
  for (int r = 0; r < rsi.height(); ++r) {
    for (int c = 0; c < rsi.width(); ++c) {
      if (rsi.value(c, r, group).norm() > opt.value_epsilon) {
        mask.set(c, r, true);
        any = true;
      }
    }
  }
  if (!any) return {};
  detail::zhang_suen_thin(mask);
  detail::remove_staircases(mask);

  std::vector<Polyline> out;
  for (auto& path : detail::trace_paths(mask)) {
    if (path.pixels.size() < 2) continue;
    std::vector<Vec2> pts;
    pts.reserve(path.pixels.size());
    for (auto [c, r] : path.pixels) pts.push_back(rsi.pixel_center(c, r));
    if (polyline_length(pts) < opt.prune_length) continue;
    int agree = 0, votes = 0;
    for (std::size_t i = 0; i + 1 < path.pixels.size(); ++i) {
      const Vec2 step = pts[i + 1] - pts[i];
      Vec2 dir = rsi.value(path.pixels[i][0], path.pixels[i][1], group);
      if (dir.norm() <= opt.value_epsilon) dir = rsi.value(path.pixels[i + 1][0], path.pixels[i + 1][1], group);
      if (dir.norm() <= opt.value_epsilon) continue;
      ++votes;
      if (dir.dot(step) > 0.0) ++agree;
    }
    if (2 * agree < votes) std::reverse(pts.begin(), pts.end());
    out.push_back(Polyline::resampled(pts));
  }
  return out;
}

inline constexpr double kLightSnapDistance = 2.0;  // m, worst light point to its lane

namespace detail {

// Projects each light onto the lane with the smallest worst-point distance so the scene
// keeps lights on centerlines; lights farther than kLightSnapDistance or collapsing to
// zero length are dropped.
inline std::vector<Polyline> snap_lights(const std::vector<Polyline>& lights, const LaneGraph& g) {
  std::vector<Polyline> out;
  for (const auto& l : lights) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t lane = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double worst = 0.0;
      for (const auto& p : l.points) worst = std::max(worst, point_polyline_distance(p, g.lanes[i].points));
      if (worst < best) {
        best = worst;
        lane = i;
      }
    }
    if (best > kLightSnapDistance) continue;
    Polyline snapped = l;
    const auto cum = g.lanes[lane].arc();
    for (auto& p : snapped.points) p = project_onto_polyline(p, g.lanes[lane].points, cum).foot;
    if (snapped.length() > 0.0) out.push_back(snapped);
  }
  return out;
}

}  // namespace detail

// Scene recovered from an RSI: skeleton lanes with adjacency from the endpoint rule, and
// lights snapped onto them. Agent boxes are not recovered.
inline SceneState vectorize_rsi(const Rsi& rsi, const SkeletonOptions& opt = {}) {
  SceneState s;
  s.fov = rsi.fov();
  auto lanes = skeleton_vectorize(rsi, EntityType::lanes, opt);
  auto adj = recover_adjacency(lanes);
  s.graph = LaneGraph(std::move(lanes), std::move(adj));
  s.red_lights = detail::snap_lights(skeleton_vectorize(rsi, EntityType::red_lights, opt), s.graph);
  s.green_lights = detail::snap_lights(skeleton_vectorize(rsi, EntityType::green_lights, opt), s.graph);
  return s;
}

}  // namespace sledge
