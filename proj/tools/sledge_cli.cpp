#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sledge/sledge.hpp"

namespace fs = std::filesystem;
using namespace sledge;

namespace {

constexpr const char* kSceneSuffix = ".scene.json";

bool is_scene_file(const fs::path& p) {
  const auto name = p.filename().string();
  return name.size() > std::string(kSceneSuffix).size() && name.ends_with(kSceneSuffix);
}

// Scene files of a directory keyed by file name.
std::map<std::string, fs::path> scene_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_scene_file(e.path())) out.emplace(e.path().filename().string(), e.path());
  if (out.empty()) throw InputError("no scene files in " + dir.string());
  return out;
}

std::vector<SceneState> load_scenes(const fs::path& dir) {
  std::vector<SceneState> out;
  for (const auto& [name, path] : scene_files(dir)) out.push_back(load_scene_file(path));
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_rasterize(const std::string& scene, const std::string& out, const std::string& svg) {
  const auto s = load_scene_file(scene);
  RasterConfig cfg;
  cfg.fov = s.fov;
  const auto rsi = rasterize(s, cfg);
  write_text_file(out, encode_rsi(rsi));
  if (!svg.empty()) write_text_file(svg, rsi_svg(rsi));
  return 0;
}

int cmd_vectorize(const std::string& rsi, const std::string& out) {
  const auto s = vectorize_rsi(decode_rsi(read_text_file(rsi)));
  save_scene_file(out, s);
  return 0;
}

int cmd_eval_recon(const std::string& pred_dir, const std::string& gt_dir, const std::string& out) {
  const auto pred = scene_files(pred_dir);
  const auto gt = scene_files(gt_dir);
  std::string csv = "scene_id,geo_f1,geo_lat,geo_chamfer,topo_f1,topo_lat,topo_chamfer\n";
  std::array<double, 6> sum{};
  std::size_t n = 0;
  for (const auto& [name, gpath] : gt) {
    const auto it = pred.find(name);
    if (it == pred.end()) throw InputError("prediction missing for " + name);
    const auto p = load_scene_file(it->second);
    const auto g = load_scene_file(gpath);
    const auto geo = geo_metrics(p.graph, g.graph);
    const auto topo = topo_metrics(p.graph, g.graph);
    const std::array<double, 6> v{geo.f1, geo.lateral, geo.chamfer, topo.f1, topo.lateral, topo.chamfer};
    csv += name;
    for (std::size_t k = 0; k < v.size(); ++k) {
      csv += fmt(",%.6f", v[k]);
      sum[k] += v[k];
    }
    csv += "\n";
    ++n;
  }
  csv += "mean";
  for (double v : sum) csv += fmt(",%.6f", v / static_cast<double>(n));
  csv += "\n";
  write_text_file(out, csv);
  return 0;
}

int cmd_eval_gen(const std::string& scenes_dir, const std::string& ref_dir, const std::string& out) {
  const auto scenes = load_scenes(scenes_dir);
  const auto ref = load_scenes(ref_dir);
  const auto rl = route_length_stats(scenes);
  const auto fr = urban_feature_frechet(scenes, ref);
  std::string csv = "feature,value\n";
  csv += fmt("route_length_mean,%.6f\n", rl.mean) + fmt("route_length_std,%.6f\n", rl.std);
  csv += "empty_scenes," + std::to_string(rl.empty_scenes) + "\n";
  csv += fmt("frechet_connectivity,%.9g\n", fr.connectivity) + fmt("frechet_density,%.9g\n", fr.density) +
         fmt("frechet_reach,%.9g\n", fr.reach) + fmt("frechet_convenience,%.9g\n", fr.convenience);
  write_text_file(out, csv);
  return 0;
}

int cmd_features(const std::string& scenes_dir, const std::string& out) {
  std::string csv = "scene_id,connectivity,density,reach,convenience,truncated,routes,longest_route\n";
  for (const auto& [name, path] : scene_files(scenes_dir)) {
    const auto s = load_scene_file(path);
    const auto f = urban_features(s.graph);
    std::size_t routes = 0;
    if (const auto start = nearest_lane(s.graph, {0.0, 0.0})) routes = enumerate_routes(s.graph, *start).size();
    csv += name + fmt(",%.6f", f.connectivity) + "," + std::to_string(f.density) + "," + std::to_string(f.reach) +
           fmt(",%.6f", f.convenience) + (f.truncated ? ",1" : ",0") + "," + std::to_string(routes) +
           fmt(",%.6f", longest_route_length(s.graph)) + "\n";
  }
  write_text_file(out, csv);
  return 0;
}

int cmd_gen(std::uint64_t seed, const std::string& layout, std::size_t tiles, const std::string& difficulty,
            double min_route, const std::string& out) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.layout = parse_layout(layout);
  validate_config(cfg);
  const auto d = parse_difficulty(difficulty);
  fs::create_directories(out);
  const fs::path dir(out);
  if (tiles == 0) {
    save_scene_file(dir / "scene.scene.json", generate_scene(cfg));
    return 0;
  }
  ChainOptions opt;
  opt.min_route_length = min_route;
  const auto chain = extrapolate_route(cfg, tiles, d, opt);
  char name[64];
  std::string manifest = "{\"seed\": " + std::to_string(seed) + ", \"layout\": \"" + layout + "\", \"difficulty\": \"" +
                         difficulty + "\", \"truncated\": " + (chain.truncated ? "true" : "false") + ", \"warning\": " +
                         nlohmann::json(chain.warning).dump() + ", \"tiles\": [";
  for (std::size_t k = 0; k < chain.tiles.size(); ++k) {
    const auto& t = chain.tiles[k];
    std::snprintf(name, sizeof name, "tile_%03zu%s", k, kSceneSuffix);
    save_scene_file(dir / name, t.scene);
    manifest += (k ? ", " : "") + std::string("{\"file\": \"") + name + "\"" +
                fmt(", \"x\": %.17g", t.pose.translation.x) + fmt(", \"y\": %.17g", t.pose.translation.y) +
                fmt(", \"rotation\": %.17g}", t.pose.rotation);
  }
  manifest += "], \"world\": \"world.json\", \"route\": \"route.csv\"";
  manifest += fmt(", \"route_length_m\": %.6f", route_length(chain.route, chain.world.graph));
  manifest += ", \"turns\": " + std::to_string(chain_turns(chain)) + "}\n";
  save_scene_file(dir / "world.json", chain.world);
  write_text_file(dir / "chain.json", manifest);
  std::string csv = "x,y\n";
  for (const auto& p : route_polyline(chain.route, chain.world.graph)) csv += fmt("%.6f", p.x) + fmt(",%.6f\n", p.y);
  write_text_file(dir / "route.csv", csv);
  if (chain.truncated) std::cerr << "warning: " << chain.warning << "\n";
  return 0;
}

void print_report(const FailureReport& r) {
  std::printf("failed=%d cause=%s progress=%.4f wrong_direction=%.3f failure_time=%.1f turns=%zu agents=%zu\n",
              r.failed ? 1 : 0, std::string(to_string(r.cause)).c_str(), r.progress, r.wrong_direction, r.failure_time,
              r.turns, r.agents);
}

int cmd_simulate(const std::string& scene, const std::string& difficulty, double horizon, const std::string& trace,
                 const std::string& events) {
  const auto s = load_scene_file(scene);
  const auto route = route_from_ego(s.graph, parse_difficulty(difficulty));
  if (!route) throw InputError("no drivable route from the ego position");
  SimConfig cfg;
  cfg.horizon = horizon;
  validate_config(cfg);
  const auto result = run_scenario(s, *route, baseline_planner, cfg);
  if (!trace.empty()) write_text_file(trace, trace_csv(result.trace));
  if (!events.empty()) write_text_file(events, event_log(result.events));
  print_report(result.report);
  return 0;
}

int cmd_benchmark(const std::string& task, double length, const std::string& routes, const std::string& traffic,
                  std::size_t n, std::uint64_t seed, unsigned threads, const std::string& suite_dir, const std::string& out) {
  if (n == 0) throw InputError("--n must be positive");
  if (!(length > 0.0)) throw InputError("--length must be positive");
  Setting setting{parse_task(task), length, parse_difficulty(routes), parse_difficulty(traffic)};
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = seed + i;
  if (!suite_dir.empty()) write_suite(suite_dir, setting, seeds);
  const auto row = run_setting(setting, seeds, baseline_planner, {}, threads);
  const auto csv = benchmark_csv({row});
  write_text_file(out, csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vectorized driving scenes, procedural generation and closed-loop planner benchmark"};
  app.require_subcommand(1);

  std::string scene, out, svg, rsi, pred, gt, ref, layout = "grid", difficulty = "easy", trace, events;
  std::string task = "lane_and_agent", routes = "easy", traffic = "easy", suite;
  std::uint64_t seed = 0;
  std::size_t tiles = 0, n = 100;
  double horizon = 30.0, length = 100.0, min_route = 0.0;
  unsigned threads = 0;

  auto* ras = app.add_subcommand("rasterize", "Rasterize a scene into an RSI file");
  ras->add_option("--scene", scene)->required();
  ras->add_option("--out", out)->required();
  ras->add_option("--png", svg, "SVG debug rendering of the raster");

  auto* vec = app.add_subcommand("vectorize", "Recover a scene from an RSI file");
  vec->add_option("--rsi", rsi)->required();
  vec->add_option("--out", out)->required();

  auto* er = app.add_subcommand("eval-recon", "GEO/TOPO reconstruction metrics of matching scene files");
  er->add_option("--pred", pred)->required();
  er->add_option("--gt", gt)->required();
  er->add_option("--out", out)->required();

  auto* eg = app.add_subcommand("eval-gen", "Route length and urban-feature Frechet distances");
  eg->add_option("--scenes", scene)->required();
  eg->add_option("--ref", ref)->required();
  eg->add_option("--out", out)->required();

  auto* ft = app.add_subcommand("features", "Urban features and route inventory per scene");
  ft->add_option("--scenes", scene)->required();
  ft->add_option("--out", out)->required();

  auto* gen = app.add_subcommand("gen", "Generate a scene or an extrapolated tile chain");
  gen->add_option("--seed", seed);
  gen->add_option("--layout", layout)->check(CLI::IsMember({"straight", "curve", "intersection", "grid"}));
  gen->add_option("--tiles", tiles, "Extrapolate up to this many tiles");
  gen->add_option("--difficulty", difficulty)->check(CLI::IsMember({"easy", "hard"}));
  gen->add_option("--min-route", min_route, "Stop extrapolating once the route reaches this length");
  gen->add_option("--out", out)->required();

  auto* sim = app.add_subcommand("simulate", "Run the baseline planner on a scene");
  sim->add_option("--scene", scene)->required();
  sim->add_option("--route", difficulty)->check(CLI::IsMember({"easy", "hard"}));
  sim->add_option("--horizon", horizon);
  sim->add_option("--trace", trace);
  sim->add_option("--events", events);

  auto* bench = app.add_subcommand("benchmark", "Planner failure rate of the baseline planner");
  bench->add_option("--task", task)->check(CLI::IsMember({"lane2agent", "lane_and_agent"}));
  bench->add_option("--length", length);
  bench->add_option("--routes", routes)->check(CLI::IsMember({"easy", "hard"}));
  bench->add_option("--traffic", traffic)->check(CLI::IsMember({"easy", "hard"}));
  bench->add_option("--n", n);
  bench->add_option("--seed", seed, "First scenario seed");
  bench->add_option("--threads", threads, "Worker threads, 0 for all cores");
  bench->add_option("--suite", suite, "Also store the scenarios in this directory");
  bench->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*ras) return cmd_rasterize(scene, out, svg);
    if (*vec) return cmd_vectorize(rsi, out);
    if (*er) return cmd_eval_recon(pred, gt, out);
    if (*eg) return cmd_eval_gen(scene, ref, out);
    if (*ft) return cmd_features(scene, out);
    if (*gen) return cmd_gen(seed, layout, tiles, difficulty, min_route, out);
    if (*sim) return cmd_simulate(scene, difficulty, horizon, trace, events);
    if (*bench) return cmd_benchmark(task, length, routes, traffic, n, seed, threads, suite, out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
