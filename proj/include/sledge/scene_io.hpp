#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <nlohmann/json.hpp>

#include "sledge/error.hpp"
#include "sledge/scene.hpp"

namespace sledge {

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", quantize(v));
  out += buf;
}

inline void append_point(std::string& out, Vec2 p) {
  out += '[';
  append_number(out, p.x);
  out += ", ";
  append_number(out, p.y);
  out += ']';
}

inline void append_polyline(std::string& out, const Polyline& pl) {
  out += '[';
  for (std::size_t i = 0; i < kPolylinePoints; ++i) {
    if (i) out += ", ";
    append_point(out, pl.points[i]);
  }
  out += ']';
}

inline void append_light_list(std::string& out, const char* key, const std::vector<Polyline>& lights) {
  out += "  \"";
  out += key;
  out += "\": [";
  for (std::size_t i = 0; i < lights.size(); ++i) {
    out += i ? ",\n    " : "\n    ";
    append_polyline(out, lights[i]);
  }
  out += lights.empty() ? "],\n" : "\n  ],\n";
}

using Json = nlohmann::json;

inline const Json& require(const Json& obj, const char* key, const std::string& field) {
  if (!obj.is_object() || !obj.contains(key)) throw InputError(field + ": missing key '" + key + "'");
  return obj.at(key);
}

inline double read_number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw InputError(field + ": expected a number");
  return j.get<double>();
}

inline Vec2 read_point(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw InputError(field + ": expected a 2-element array");
  return {read_number(j[0], field + "[0]"), read_number(j[1], field + "[1]")};
}

inline Polyline read_polyline(const Json& j, const std::string& field) {
  if (!j.is_array()) throw InputError(field + ": expected an array of points");
  if (j.size() != kPolylinePoints) {
    throw InputError(field + ": polyline length " + std::to_string(j.size()) + " != 20");
  }
  Polyline pl;
  for (std::size_t i = 0; i < kPolylinePoints; ++i) pl.points[i] = read_point(j[i], field + "[" + std::to_string(i) + "]");
  return pl;
}

}  // namespace detail

// Canonical text form: fixed key order, 6-decimal floats, explicit empty lists.
inline std::string save_scene(const SceneState& s) {
  std::string out;
  out.reserve(1024 + s.graph.lanes.size() * 600);
  out += "{\n  \"fov_m\": ";
  detail::append_number(out, s.fov);
  out += ",\n  \"city\": ";
  out += s.city ? nlohmann::json(*s.city).dump() : std::string("null");
  out += ",\n  \"lanes\": [";
  for (std::size_t i = 0; i < s.graph.lanes.size(); ++i) {
    out += i ? ",\n    " : "\n    ";
    out += "{\"points\": ";
    detail::append_polyline(out, s.graph.lanes[i]);
    out += ", \"successors\": [";
    const auto succ = s.graph.adjacency.successors(i);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      if (k) out += ", ";
      out += std::to_string(succ[k]);
    }
    out += "]}";
  }
  out += s.graph.lanes.empty() ? "],\n" : "\n  ],\n";
  detail::append_light_list(out, "red_lights", s.red_lights);
  detail::append_light_list(out, "green_lights", s.green_lights);
  out += "  \"agents\": [";
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    out += i ? ",\n    " : "\n    ";
    out += "{\"kind\": \"";
    out += to_string(a.kind);
    out += "\", \"center\": ";
    detail::append_point(out, a.center);
    out += ", \"heading\": ";
    detail::append_number(out, a.heading);
    out += ", \"extent\": ";
    detail::append_point(out, {a.extent.length, a.extent.width});
    if (a.speed) {
      out += ", \"speed\": ";
      detail::append_number(out, *a.speed);
    }
    out += '}';
  }
  out += s.agents.empty() ? "],\n" : "\n  ],\n";
  out += "  \"ego_velocity\": ";
  detail::append_point(out, s.ego_velocity);
  out += "\n}\n";
  return out;
}

inline SceneState load_scene(std::string_view text) {
  using detail::Json;
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("scene: malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("scene: top level must be an object");

  SceneState s;
  s.fov = detail::read_number(detail::require(doc, "fov_m", "scene"), "fov_m");
  const auto& city = detail::require(doc, "city", "scene");
  if (city.is_string()) {
    s.city = city.get<std::string>();
  } else if (!city.is_null()) {
    throw InputError("city: expected a string or null");
  }

  const auto& lanes = detail::require(doc, "lanes", "scene");
  if (!lanes.is_array()) throw InputError("lanes: expected an array");
  std::vector<Polyline> polylines;
  std::vector<std::vector<std::size_t>> succ;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const std::string field = "lanes[" + std::to_string(i) + "]";
    polylines.push_back(detail::read_polyline(detail::require(lanes[i], "points", field), field + ".points"));
    const auto& sj = detail::require(lanes[i], "successors", field);
    if (!sj.is_array()) throw InputError(field + ".successors: expected an array");
    std::vector<std::size_t> list;
    for (const auto& v : sj) {
      if (!v.is_number_unsigned()) throw InputError(field + ".successors: expected lane indices");
      list.push_back(v.get<std::size_t>());
    }
    succ.push_back(std::move(list));
  }
  Adjacency adj(polylines.size());
  for (std::size_t i = 0; i < succ.size(); ++i) {
    for (auto j : succ[i]) {
      if (j >= polylines.size()) {
        throw InputError("lanes[" + std::to_string(i) + "].successors: index " + std::to_string(j) + " out of range");
      }
      adj.set(i, j);
    }
  }
  s.graph = LaneGraph(std::move(polylines), std::move(adj));

  auto read_lights = [&](const char* key) {
    const auto& arr = detail::require(doc, key, "scene");
    if (!arr.is_array()) throw InputError(std::string(key) + ": expected an array");
    std::vector<Polyline> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.push_back(detail::read_polyline(arr[i], std::string(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  };
  s.red_lights = read_lights("red_lights");
  s.green_lights = read_lights("green_lights");

  const auto& agents = detail::require(doc, "agents", "scene");
  if (!agents.is_array()) throw InputError("agents: expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string field = "agents[" + std::to_string(i) + "]";
    const auto& aj = agents[i];
    AgentBox a;
    const auto& kind = detail::require(aj, "kind", field);
    if (!kind.is_string()) throw InputError(field + ".kind: expected a string");
    try {
      a.kind = parse_agent_kind(kind.get<std::string>());
    } catch (const InputError& e) {
      throw InputError(field + ".kind: " + e.what());
    }
    a.center = detail::read_point(detail::require(aj, "center", field), field + ".center");
    a.heading = detail::read_number(detail::require(aj, "heading", field), field + ".heading");
    const Vec2 ext = detail::read_point(detail::require(aj, "extent", field), field + ".extent");
    a.extent = {ext.x, ext.y};
    if (aj.contains("speed") && !aj.at("speed").is_null()) {
      a.speed = detail::read_number(aj.at("speed"), field + ".speed");
    }
    s.agents.push_back(a);
  }
  s.ego_velocity = detail::read_point(detail::require(doc, "ego_velocity", "scene"), "ego_velocity");
  validate_scene(s);
  return s;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

inline SceneState load_scene_file(const std::filesystem::path& path) { return load_scene(read_text_file(path)); }

inline void save_scene_file(const std::filesystem::path& path, const SceneState& s) {
  write_text_file(path, save_scene(s));
}

}  // namespace sledge
