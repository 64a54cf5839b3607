// SPDX-License-Identifier: Apache-2.0
// v3dg: build LOD bundles from 3DGS assets, render and benchmark composed
// scenes, and serve them to the browser viewer.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <tbb/global_control.h>

#include "v3dg/bench.hpp"
#include "v3dg/bundle.hpp"
#include "v3dg/error.hpp"
#include "v3dg/image.hpp"
#include "v3dg/lod_build.hpp"
#include "v3dg/lod_select.hpp"
#include "v3dg/ply.hpp"
#include "v3dg/scene_file.hpp"
#include "v3dg/viewer.hpp"

namespace {

using namespace v3dg;
using Clock = std::chrono::steady_clock;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "x,y,z" or "x,y,z,tx,ty,tz"; the latter also sets a look-at target.
std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid number '") + item + "' in " + what);
    }
  }
  return out;
}

struct ViewFlags {
  std::string camera;  // "ex,ey,ez[,tx,ty,tz]"
  int width = 480;
  int height = 270;
  double fov_deg = 45.0;

  Camera make(const LoadedScene& scene) const {
    const BoundingSphere b = scene.bounding_sphere();
    Eigen::Vector3d eye = b.center + Eigen::Vector3d(0.0, -2.5, 1.2) * std::max(b.radius, 1e-3);
    Eigen::Vector3d target = b.center;
    if (!camera.empty()) {
      const auto v = parse_numbers(camera, "--camera");
      if (v.size() != 3 && v.size() != 6) throw UsageError("--camera expects 3 or 6 comma-separated numbers");
      eye = {v[0], v[1], v[2]};
      if (v.size() == 6) target = {v[3], v[4], v[5]};
    }
    const Eigen::Vector3d dir = (target - eye).normalized();
    const Eigen::Vector3d up = std::abs(dir.z()) < 0.999 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
    const double f = focal_from_fov_x(fov_deg * 3.14159265358979323846 / 180.0, width);
    return look_at(eye, target, up, width, height, f, f);
  }

  void add_to(CLI::App* cmd) {
    cmd->add_option("--camera", camera, "Eye position, optionally followed by target: ex,ey,ez[,tx,ty,tz]");
    cmd->add_option("--width", width, "Image width in pixels")->check(CLI::Range(1, 1 << 14));
    cmd->add_option("--height", height, "Image height in pixels")->check(CLI::Range(1, 1 << 14));
    cmd->add_option("--fov", fov_deg, "Horizontal field of view in degrees")->check(CLI::Range(1.0, 179.0));
  }
};

void print_layers(const Bundle& b) {
  std::printf("%-6s %10s %12s\n", "layer", "clusters", "gaussians");
  for (std::uint32_t l = 0; l < b.layer_count; ++l) {
    std::printf("%-6u %10zu %12zu\n", l, b.clusters_in_layer(l).size(), b.gaussians_in_layer(l));
  }
}

int cmd_build(const std::string& input, const std::string& output, const BuildParams& params, bool quiet) {
  const auto start = Clock::now();
  const GaussianSet asset = load_ply(input);
  BuildOptions opts;
  if (!quiet) {
    opts.progress = [](const BuildProgress& p) {
      std::fprintf(stderr, "\rlayer %u: %zu/%zu groups", p.layer + 1, p.groups_done, p.groups_total);
      if (p.groups_done == p.groups_total) std::fputc('\n', stderr);
    };
  }
  const Bundle bundle = build_bundle(asset, params, opts);
  write_bundle(bundle, output);
  print_layers(bundle);
  std::printf("layers %u, clusters %zu, gaussians %zu, wall %.2f s\n", bundle.layer_count, bundle.clusters.size(),
              bundle.gaussians.size(), seconds_since(start));
  return 0;
}

int cmd_info(const std::string& path) {
  const Bundle b = read_bundle(path);  // re-validates every invariant
  std::printf("bundle %s\n", path.c_str());
  std::printf("format version %u\n", Bundle::kFormatVersion);
  std::printf("params: cluster size %u, group size %u, iterations %u, scale expansion %.9g, seed %llu\n",
              b.params.gaussians_per_cluster, b.params.clusters_per_group, b.params.simplify_iterations,
              b.params.scale_expansion, static_cast<unsigned long long>(b.params.seed));
  print_layers(b);
  std::printf("invariants: ok\n");
  return 0;
}

LoadedScene load_scene_file(const std::string& path) { return load_scene_bundles(load_scene(path)); }

int cmd_render(const std::string& scene_path, const std::string& out, const ViewFlags& view, double tau,
               const std::string& mode_name, double clip, bool frustum_cull) {
  RenderMode mode;
  if (!parse_render_mode(mode_name, mode)) throw UsageError("unknown --mode '" + mode_name + "'");
  const LoadedScene scene = load_scene_file(scene_path);
  const Camera cam = view.make(scene);

  const auto start = Clock::now();
  SelectOptions sel;
  sel.frustum_cull = frustum_cull;
  const SelectionResult r = mode == RenderMode::kLod || mode == RenderMode::kLayerDebug ? select_scene(scene, cam, tau, sel)
                                                                                        : select_finest(scene);
  std::vector<std::uint32_t> layers;
  GaussianSet gs = gather(scene, r, mode == RenderMode::kLayerDebug ? &layers : nullptr);
  if (mode == RenderMode::kRadiusClip) gs = radius_clip_filter(gs, cam, clip);
  if (mode == RenderMode::kLayerDebug) {
    for (std::size_t i = 0; i < gs.size(); ++i) gs.colors[i] = layer_palette(layers[i]);
  }
  const ImageRGBA img = render(gs, cam);
  const double ms = seconds_since(start) * 1e3;
  write_png(img, out);
  const double pct = r.resident_count == 0 ? 0.0 : 100.0 * static_cast<double>(gs.size()) / static_cast<double>(r.resident_count);
  std::fprintf(stderr, "selected %zu of %llu gaussians (%.2f%%), render %.1f ms\n", gs.size(),
               static_cast<unsigned long long>(r.resident_count), pct, ms);
  return 0;
}

int cmd_bench(const std::string& scene_path, const std::string& out, const std::string& taus_text,
              const std::string& preset_name, double extent, int distances, int ssaa, bool no_quality,
              const std::string& png_dir, bool frustum_cull) {
  const LoadedScene scene = load_scene_file(scene_path);
  TrajectoryPreset preset;
  if (preset_name == "desk") {
    preset = TrajectoryPreset::desk();
  } else if (preset_name == "full") {
    preset = TrajectoryPreset::full();
  } else {
    throw UsageError("unknown --preset '" + preset_name + "'");
  }
  if (distances > 0) preset.distances = distances;
  if (!(extent > 0.0)) {
    const BoundingSphere b = scene.bounding_sphere();
    extent = b.center.norm() + 4.0 * b.radius;
  }
  const auto taus = parse_numbers(taus_text, "--taus");
  for (double t : taus) {
    if (!(t >= 0.0)) throw UsageError("tolerances must be >= 0");
  }
  BenchOptions opts;
  opts.ssaa = ssaa;
  opts.measure_quality = !no_quality;
  opts.select.frustum_cull = frustum_cull;
  if (!png_dir.empty()) opts.png_dir = png_dir;
  opts.progress = [](std::size_t done, std::size_t total) { std::fprintf(stderr, "\rcamera %zu/%zu", done, total); };
  const auto trajectory = gen_trajectory(extent, preset);
  const auto records = run_bench(scene, taus, trajectory, opts);
  std::fputc('\n', stderr);
  write_bench_csv(records, out);
  std::fprintf(stderr, "%zu rows written to %s\n", records.size(), out.c_str());
  return 0;
}

int cmd_serve(const std::string& scene_path, const std::string& address, int port, const std::string& static_dir) {
  auto scene = std::make_shared<const LoadedScene>(load_scene_file(scene_path));
  ViewerOptions opts;
  opts.address = address;
  opts.port = static_cast<unsigned short>(port);
  opts.static_dir = static_dir;
  ViewerServer server(scene, opts);
  std::fprintf(stderr, "serving %s on ws://%s:%u (GET /scene for metadata)\n", scene_path.c_str(), address.c_str(),
               server.port());
  server.run();
  return 0;
}

int cmd_synth(const std::string& out, std::size_t count, std::uint64_t seed) {
  write_ply(synth_shell_asset(count, seed), out);
  return 0;
}

int cmd_grid_scene(const std::string& out, const std::string& asset_id, const std::string& bundle, int rows, int cols,
                   double spacing, double min_scale, double max_scale, std::uint64_t seed) {
  if (min_scale <= 0.0 || max_scale < min_scale) throw UsageError("scales must satisfy 0 < min <= max");
  Scene s;
  // Scene files resolve relative asset paths against their own directory.
  std::filesystem::path stored(bundle);
  if (stored.is_relative()) {
    stored = std::filesystem::absolute(stored).lexically_relative(std::filesystem::absolute(out).parent_path());
  }
  s.assets[asset_id] = stored.generic_string();
  s.instances = grid_instances(asset_id, rows, cols, spacing, min_scale, max_scale, seed);
  write_scene(s, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"v3dg: level-of-detail build, selection and rendering for 3D Gaussian scenes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file (flags and environment take precedence)");

  std::optional<tbb::global_control> thread_cap;
  if (const char* env = std::getenv("V3DG_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) {
      std::fprintf(stderr, "error: V3DG_THREADS must be a positive integer, got '%s'\n", env);
      return kExitUsage;
    }
    thread_cap.emplace(tbb::global_control::max_allowed_parallelism, static_cast<std::size_t>(n));
  }

  // build
  std::string build_in, build_out;
  BuildParams params;
  bool quiet = false;
  auto* build = app.add_subcommand("build", "Build a LOD bundle from a 3DGS PLY asset");
  build->add_option("input", build_in, "Input PLY")->required();
  build->add_option("output", build_out, "Output bundle")->required();
  build->add_option("--cluster-size", params.gaussians_per_cluster, "Gaussians per cluster")
      ->check(CLI::Range(1u, 1u << 30))
      ->capture_default_str();
  build->add_option("--group-size", params.clusters_per_group, "Clusters per group")
      ->check(CLI::Range(2u, 1u << 20))
      ->capture_default_str();
  build->add_option("--iterations", params.simplify_iterations, "Local-splatting iterations per group")
      ->capture_default_str();
  build->add_option("--scale-expansion", params.scale_expansion, "Scale factor applied after downsampling")
      ->check(CLI::Range(1.0, 1e3))
      ->capture_default_str();
  build->add_option("--seed", params.seed, "Build seed")->capture_default_str();
  build->add_flag("--quiet", quiet, "No progress output");

  // render
  std::string render_scene, render_out, mode = "lod";
  double tau = 2048.0, clip = 2.0;
  bool cull = false;
  ViewFlags view;
  auto* rend = app.add_subcommand("render", "Render one frame of a scene to PNG");
  rend->add_option("scene", render_scene, "Scene JSON")->required();
  rend->add_option("output", render_out, "Output PNG")->required();
  rend->add_option("--tau", tau, "Footprint tolerance in pixels^2")
      ->check(CLI::NonNegativeNumber)
      ->envname("V3DG_TAU")
      ->capture_default_str();
  rend->add_option("--mode", mode, "lod | vanilla | radius-clip | layer-debug")->capture_default_str();
  rend->add_option("--clip", clip, "Radius-clip threshold in pixels")->check(CLI::NonNegativeNumber)->capture_default_str();
  rend->add_flag("--frustum-cull", cull, "Drop selected clusters outside the view frustum");
  view.add_to(rend);

  // bench
  std::string bench_scene, bench_out = "bench.csv", taus = "512,1024,2048,4096,8192", preset = "desk", png_dir;
  double extent = 0.0;
  int distances = 0, ssaa = 4;
  bool no_quality = false, bench_cull = false;
  auto* bench = app.add_subcommand("bench", "Run the trajectory benchmark and write CSV");
  bench->add_option("scene", bench_scene, "Scene JSON")->required();
  bench->add_option("--out", bench_out, "CSV output path")->capture_default_str();
  bench->add_option("--taus", taus, "Comma-separated tolerances")->capture_default_str();
  bench->add_option("--preset", preset, "desk (480x270) or full (1920x1080)")->capture_default_str();
  bench->add_option("--extent", extent, "Farthest camera distance; derived from the scene when 0");
  bench->add_option("--distances", distances, "Number of camera distances (preset default when 0)")
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--ssaa", ssaa, "Supersampling factor of the reference")->check(CLI::Range(1, 8))->capture_default_str();
  bench->add_flag("--no-quality", no_quality, "Skip SSAA references and PSNR");
  bench->add_option("--png-dir", png_dir, "Write per-camera PNGs here");
  bench->add_flag("--frustum-cull", bench_cull, "Drop selected clusters outside the view frustum");

  // info
  std::string info_path;
  auto* info = app.add_subcommand("info", "Print a bundle's layers and re-verify its invariants");
  info->add_option("bundle", info_path, "Bundle file")->required();

  // serve
  std::string serve_scene, address = "127.0.0.1", static_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve a scene to the browser viewer over WebSocket");
  serve->add_option("scene", serve_scene, "Scene JSON")->required();
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--address", address, "Listen address")->capture_default_str();
  serve->add_option("--static", static_dir, "Directory of viewer UI files served over HTTP");

  // synth
  std::string synth_out;
  std::size_t synth_count = 65536;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write a synthetic sphere-shell asset as PLY");
  synth->add_option("output", synth_out, "Output PLY")->required();
  synth->add_option("--count", synth_count, "Number of Gaussians")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 28))->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();

  // grid-scene
  std::string grid_out, grid_asset = "asset", grid_bundle;
  int rows = 5, cols = 5;
  double spacing = 3.0, min_scale = 0.8, max_scale = 1.2;
  std::uint64_t grid_seed = 7;
  auto* grid = app.add_subcommand("grid-scene", "Write a scene JSON with a grid of randomly rotated instances");
  grid->add_option("output", grid_out, "Output scene JSON")->required();
  grid->add_option("--bundle", grid_bundle, "Bundle path; relative paths are rewritten relative to the scene file")->required();
  grid->add_option("--asset", grid_asset, "Asset id")->capture_default_str();
  grid->add_option("--rows", rows, "Grid rows")->check(CLI::Range(1, 1000))->capture_default_str();
  grid->add_option("--cols", cols, "Grid columns")->check(CLI::Range(1, 1000))->capture_default_str();
  grid->add_option("--spacing", spacing, "Distance between instances")->capture_default_str();
  grid->add_option("--min-scale", min_scale, "Smallest instance scale")->capture_default_str();
  grid->add_option("--max-scale", max_scale, "Largest instance scale")->capture_default_str();
  grid->add_option("--seed", grid_seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*build) return cmd_build(build_in, build_out, params, quiet);
    if (*rend) return cmd_render(render_scene, render_out, view, tau, mode, clip, cull);
    if (*bench) {
      return cmd_bench(bench_scene, bench_out, taus, preset, extent, distances, ssaa, no_quality, png_dir, bench_cull);
    }
    if (*info) return cmd_info(info_path);
    if (*serve) return cmd_serve(serve_scene, address, port, static_dir);
    if (*synth) return cmd_synth(synth_out, synth_count, synth_seed);
    if (*grid) {
      return cmd_grid_scene(grid_out, grid_asset, grid_bundle, rows, cols, spacing, min_scale, max_scale, grid_seed);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const v3dg::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
