#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sledge/bench.hpp"
#include "sledge/error.hpp"
#include "sledge/lanegraph.hpp"
#include "sledge/scene_io.hpp"
#include "sledge/worldgen.hpp"

namespace sledge {

enum class Task { lane_to_agent, lane_and_agent };

inline std::string_view to_string(Task t) { return t == Task::lane_to_agent ? "lane2agent" : "lane_and_agent"; }

inline Task parse_task(std::string_view s) {
  if (s == "lane2agent") return Task::lane_to_agent;
  if (s == "lane_and_agent") return Task::lane_and_agent;
  throw InputError("unknown task: " + std::string(s));
}

struct Setting {
  Task task = Task::lane_and_agent;
  double length = 100.0;  // route length, m
  Difficulty routes = Difficulty::easy;
  Difficulty traffic = Difficulty::easy;
};

// Simulated time granted per route: 30 s per 100 m.
inline double horizon_for(double length) { return 0.3 * length; }

struct Scenario {
  std::uint64_t seed = 0;
  SceneState scene;
  Route route;
  double horizon = 0.0;
  std::size_t turns = 0;
};

struct SuiteOptions {
  Layout layout = Layout::grid;
  double agent_density = 4.0;
  double light_probability = 0.5;
  std::size_t traffic_samples = 8;
  // Route pieces chosen per selection step when growing a route over a fixed map.
  double selection_step = 100.0;
};

// Cuts a route down to `length` meters past its entry point. Returns nullopt when the
// route is shorter.
inline std::optional<Route> truncate_route(const Route& r, const LaneGraph& g, double length) {
  Route out;
  out.entry_offset = r.entry_offset;
  double travelled = -r.entry_offset;
  for (std::size_t k = 0; k < r.lanes.size(); ++k) {
    const double len = g.lanes[r.lanes[k]].length();
    const double end = k + 1 == r.lanes.size() ? r.exit_offset : len;
    out.lanes.push_back(r.lanes[k]);
    if (travelled + end >= length) {
      out.exit_offset = length - travelled;
      return out;
    }
    travelled += len;
  }
  return std::nullopt;
}

// Greedy route growth over a fixed graph: repeatedly picks, per difficulty, among the
// routes of about `step` meters that continue from the current last lane.
inline Route grow_route(const LaneGraph& g, std::size_t start, double entry_offset, Difficulty d, double length,
                        double step) {
  Route r = full_route({start}, g);
  r.entry_offset = entry_offset;
  while (route_length(r, g) < length) {
    RouteOptions opt;
    opt.max_length = step;
    const auto piece = select_route(g, r.lanes.back(), d, opt);
    if (piece.lanes.size() < 2) break;
    r.lanes.insert(r.lanes.end(), piece.lanes.begin() + 1, piece.lanes.end());
    r.exit_offset = g.lanes[r.lanes.back()].length();
  }
  return r;
}

inline std::optional<std::size_t> ego_lane(const LaneGraph& g) {
  std::optional<std::size_t> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    const auto cum = g.lanes[i].arc();
    const auto proj = project_onto_polyline({0.0, 0.0}, g.lanes[i].points, cum);
    const double cost = proj.distance + 2.0 * angle_between(tangent_at(g.lanes[i].points, cum, proj.arc), {1.0, 0.0});
    if (proj.distance < kHalfLane && cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return best;
}

// Route from the lane under the ego, selected per difficulty among the enumerated routes.
inline std::optional<Route> route_from_ego(const LaneGraph& g, Difficulty d) {
  const auto start = ego_lane(g);
  if (!start) return std::nullopt;
  Route r = select_route(g, *start, d);
  const auto& lane = g.lanes[*start];
  r.entry_offset = std::min(project_onto_polyline({0.0, 0.0}, lane.points, lane.arc()).arc, lane.length());
  if (r.lanes.size() == 1 && r.exit_offset <= r.entry_offset) return std::nullopt;
  return r;
}

// Builds one scenario. Lane & Agent extrapolates tiles until the route is long enough;
// Lane -> Agent takes a lane-only map, grows the route on it and samples traffic near it.
inline std::optional<Scenario> build_scenario(const Setting& setting, std::uint64_t seed, const SuiteOptions& opt = {},
                                              std::string* why = nullptr) {
  auto fail = [&](std::string msg) -> std::optional<Scenario> {
    if (why) *why = std::move(msg);
    return std::nullopt;
  };
  GenConfig cfg;
  cfg.seed = seed;
  cfg.layout = opt.layout;
  cfg.min_lanes = 1;
  cfg.max_lanes = 2;
  cfg.light_probability = opt.light_probability;
  Scenario sc;
  sc.seed = seed;
  sc.horizon = horizon_for(setting.length);

  if (setting.task == Task::lane_and_agent) {
    cfg.agent_density = opt.agent_density;
    ChainOptions co;
    co.min_route_length = setting.length;
    co.traffic = setting.traffic;
    co.traffic_samples = opt.traffic_samples;
    const std::size_t max_tiles = static_cast<std::size_t>(std::ceil(setting.length / 16.0)) + 4;
    auto chain = extrapolate_route(cfg, max_tiles, setting.routes, co);
    auto route = truncate_route(chain.route, chain.world.graph, setting.length);
    if (!route) return fail(chain.truncated ? chain.warning : "route shorter than requested");
    sc.route = *route;
    TileChain view = chain;
    view.route = sc.route;
    sc.turns = chain_turns(view);
    sc.scene = std::move(chain.world);
  } else {
    cfg.agent_density = 0.0;
    cfg.fov = 2.0 * setting.length + 160.0;
    SceneState map = generate_scene(cfg);
    const auto start = ego_lane(map.graph);
    if (!start) return fail("no lane under the ego");
    const auto& lane = map.graph.lanes[*start];
    const double entry = project_onto_polyline({0.0, 0.0}, lane.points, lane.arc()).arc;
    const Route grown = grow_route(map.graph, *start, entry, setting.routes, setting.length + 1.0, opt.selection_step);
    auto route = truncate_route(grown, map.graph, setting.length);
    if (!route) return fail("map too small for the route");
    sc.route = *route;
    sc.turns = count_turns(sc.route, map.graph);
    TrafficOptions traffic;
    traffic.density = opt.agent_density;
    traffic.route = route_geometry(sc.route, map.graph).pts;
    sc.scene = sample_traffic(map, mix_seed(seed, 7), setting.traffic, opt.traffic_samples, traffic);
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkRow {
  Setting setting;
  std::size_t scenarios = 0;
  std::size_t construction_failures = 0;
  double mean_turns = 0.0;
  double mean_agents = 0.0;
  double pfr = 0.0;
  std::vector<std::size_t> cause_counts = std::vector<std::size_t>(5, 0);
};

struct ScenarioOutcome {
  std::uint64_t seed = 0;
  bool constructed = false;
  std::string error;
  FailureReport report;
};

// Runs every seed of one setting. Scenarios run on `threads` workers; results are reduced
// in seed order.
inline BenchmarkRow run_setting(const Setting& setting, const std::vector<std::uint64_t>& seeds, const Planner& planner,
                                const SuiteOptions& opt = {}, unsigned threads = 0,
                                std::vector<ScenarioOutcome>* outcomes = nullptr) {
  if (seeds.empty()) throw InputError("benchmark: no seeds");
  std::vector<ScenarioOutcome> results(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      auto& r = results[i];
      r.seed = seeds[i];
      try {
        auto sc = build_scenario(setting, seeds[i], opt, &r.error);
        if (!sc) continue;
        r.constructed = true;
        SimConfig cfg;
        cfg.horizon = sc->horizon;
        cfg.record_trace = false;
        r.report = run_scenario(sc->scene, sc->route, planner, cfg).report;
        r.report.turns = sc->turns;
      } catch (const std::exception& e) {
        r.constructed = false;
        r.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, seeds.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BenchmarkRow row;
  row.setting = setting;
  double turns = 0.0, agents = 0.0, failed = 0.0;
  for (const auto& r : results) {
    if (!r.constructed) {
      ++row.construction_failures;
      continue;
    }
    ++row.scenarios;
    turns += static_cast<double>(r.report.turns);
    agents += static_cast<double>(r.report.agents);
    failed += r.report.failed ? 1.0 : 0.0;
    ++row.cause_counts[static_cast<std::size_t>(r.report.cause)];
  }
  if (row.scenarios) {
    const double n = static_cast<double>(row.scenarios);
    row.mean_turns = turns / n;
    row.mean_agents = agents / n;
    row.pfr = failed / n;
  }
  if (outcomes) *outcomes = std::move(results);
  return row;
}

inline std::vector<BenchmarkRow> run_benchmark(const std::vector<Setting>& settings, const std::vector<std::uint64_t>& seeds,
                                               const Planner& planner, const SuiteOptions& opt = {}, unsigned threads = 0) {
  if (settings.empty()) throw InputError("benchmark: suite is empty");
  std::vector<BenchmarkRow> rows;
  for (const auto& s : settings) rows.push_back(run_setting(s, seeds, planner, opt, threads));
  return rows;
}

inline std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out =
      "task,length,routes,traffic,scenarios,construction_failures,mean_turns,mean_agents,pfr,"
      "low_progress,wrong_direction,off_road,at_fault_collision\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.0f,%s,%s,%zu,%zu,%.4f,%.4f,%.4f,%zu,%zu,%zu,%zu\n",
                  std::string(to_string(r.setting.task)).c_str(), r.setting.length,
                  std::string(to_string(r.setting.routes)).c_str(), std::string(to_string(r.setting.traffic)).c_str(),
                  r.scenarios, r.construction_failures, r.mean_turns, r.mean_agents, r.pfr, r.cause_counts[1],
                  r.cause_counts[2], r.cause_counts[3], r.cause_counts[4]);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stored suites: one scene file and one manifest per scenario.

inline std::string scenario_manifest(const Scenario& sc, const Setting& s) {
  std::string out = "{\"seed\": " + std::to_string(sc.seed) + ", \"task\": \"" + std::string(to_string(s.task)) +
                    "\", \"length_m\": ";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", s.length);
  out += buf;
  out += ", \"horizon_s\": ";
  std::snprintf(buf, sizeof buf, "%.6f", sc.horizon);
  out += buf;
  out += ", \"route\": {\"lanes\": [";
  for (std::size_t i = 0; i < sc.route.lanes.size(); ++i) out += (i ? ", " : "") + std::to_string(sc.route.lanes[i]);
  std::snprintf(buf, sizeof buf, "], \"entry_offset\": %.6f, \"exit_offset\": %.6f}", sc.route.entry_offset,
                sc.route.exit_offset);
  out += buf;
  out += ", \"turns\": " + std::to_string(sc.turns) + "}\n";
  return out;
}

inline Route parse_manifest_route(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.contains("route")) throw InputError("manifest: missing route");
  Route r;
  try {
    for (const auto& l : j["route"].at("lanes")) r.lanes.push_back(l.get<std::size_t>());
    r.entry_offset = j["route"].at("entry_offset").get<double>();
    r.exit_offset = j["route"].at("exit_offset").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  return r;
}

// Writes scenarios for `seeds`; returns the number written (construction failures are
// skipped and counted by the caller through the return value).
inline std::size_t write_suite(const std::filesystem::path& dir, const Setting& setting,
                               const std::vector<std::uint64_t>& seeds, const SuiteOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  std::size_t written = 0;
  for (auto seed : seeds) {
    auto sc = build_scenario(setting, seed, opt);
    if (!sc) continue;
    const std::string stem = "scenario_" + std::to_string(seed);
    save_scene_file(dir / (stem + ".scene.json"), quantize_scene(sc->scene));
    write_text_file(dir / (stem + ".manifest.json"), scenario_manifest(*sc, setting));
    ++written;
  }
  return written;
}

}  // namespace sledge
