// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "v3dg/camera.hpp"
#include "v3dg/image.hpp"
#include "v3dg/lod_select.hpp"
#include "v3dg/rasterizer.hpp"

namespace v3dg {

struct TrajectoryPreset {
  int width = 1920;
  int height = 1080;
  double fov_x = 0.7853981633974483;  // pi / 4
  int directions = 4;
  std::vector<double> elevations_deg = {15, 30, 45, 60, 75};
  int distances = 20;

  /// 1920x1080, 4 x 5 x 20 = 400 cameras.
  static TrajectoryPreset full();
  /// 480x270 with the same angular layout.
  static TrajectoryPreset desk();
};

struct TrajectoryCamera {
  Camera camera;
  int direction = 0;
  double elevation_deg = 0.0;
  int distance = 0;  // 0 is nearest
};

/// Cameras on four orthogonal xy directions, each elevation and
/// `distances` radii evenly spaced up to `scene_extent`
/// (radius_i = extent * (i + 1) / distances), all looking at the origin.
std::vector<TrajectoryCamera> gen_trajectory(double scene_extent, const TrajectoryPreset& preset = TrajectoryPreset::full());

/// Renders `gs` at k times the resolution and box-downsamples by k. Work
/// proceeds in horizontal bands so memory stays bounded at large k.
ImageRGBA ssaa_reference(const GaussianSet& gs, const Camera& cam, int k = 4, const RasterConfig& cfg = {});
/// Reference of the vanilla (all layer-0) scene.
ImageRGBA ssaa_reference(const LoadedScene& scene, const Camera& cam, int k = 4, const RasterConfig& cfg = {});

struct BenchRecord {
  int direction = 0;
  double elevation = 0.0;
  int distance = 0;
  double tau = 0.0;
  std::uint64_t sel_count = 0;
  std::uint64_t vanilla_count = 0;
  double percentage = 0.0;
  double ours_ms = 0.0;
  double vanilla_ms = 0.0;
  double ours_psnr = 0.0;
  double vanilla_psnr = 0.0;
};

inline constexpr const char* kBenchCsvHeader =
    "direction,elevation,distance,tau,sel_count,vanilla_count,percentage,ours_ms,vanilla_ms,ours_psnr,vanilla_psnr";

struct BenchOptions {
  int ssaa = 4;
  bool measure_quality = true;
  SelectOptions select;
  RasterConfig raster;
  /// When set, ours/vanilla/reference PNGs are written here per camera.
  std::optional<std::filesystem::path> png_dir;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Timed pipeline of one frame: selection, gathering and rasterization.
struct FrameResult {
  ImageRGBA image;
  SelectionResult selection;
  double total_ms = 0.0;
};
FrameResult render_lod_frame(const LoadedScene& scene, const Camera& cam, double tau, const SelectOptions& sel = {},
                             const RasterConfig& cfg = {});
FrameResult render_vanilla_frame(const LoadedScene& scene, const Camera& cam, const RasterConfig& cfg = {});

/// For every camera: vanilla count, time and PSNR against the SSAA
/// reference, then the same for LOD selection at every tau. Cameras run
/// one after another so timings do not compete.
std::vector<BenchRecord> run_bench(const LoadedScene& scene, const std::vector<double>& taus,
                                   const std::vector<TrajectoryCamera>& trajectory, const BenchOptions& opts = {});

void write_bench_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& path);
std::string bench_csv(const std::vector<BenchRecord>& records);

/// Synthetic asset: N Gaussians scattered on a unit sphere shell with a
/// smooth color pattern, small anisotropic scales and mixed opacity.
GaussianSet synth_shell_asset(std::size_t n, std::uint64_t seed);

/// `rows` x `cols` instances of one asset on the xy plane, `spacing`
/// apart, centered on the origin, each with a random yaw and a uniform
/// scale drawn from [min_scale, max_scale].
std::vector<Instance> grid_instances(const std::string& asset, int rows, int cols, double spacing,
                                     double min_scale, double max_scale, std::uint64_t seed);

}  // namespace v3dg
