// SPDX-License-Identifier: Apache-2.0
#include "v3dg/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "v3dg/bundle.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

TrajectoryPreset TrajectoryPreset::full() { return {}; }

TrajectoryPreset TrajectoryPreset::desk() {
  TrajectoryPreset p;
  p.width = 480;
  p.height = 270;
  return p;
}

std::vector<TrajectoryCamera> gen_trajectory(double scene_extent, const TrajectoryPreset& preset) {
  if (!(scene_extent > 0.0) || !std::isfinite(scene_extent)) {
    raise(ErrorKind::kArgument, "scene extent must be positive");
  }
  if (preset.directions < 1 || preset.distances < 1 || preset.width < 1 || preset.height < 1) {
    raise(ErrorKind::kArgument, "trajectory preset needs at least one direction, distance and pixel");
  }
  const double f = focal_from_fov_x(preset.fov_x, preset.width);
  std::vector<TrajectoryCamera> out;
  for (int d = 0; d < preset.directions; ++d) {
    const double azimuth = 2.0 * std::numbers::pi * d / preset.directions;
    for (double elevation : preset.elevations_deg) {
      const double e = elevation * std::numbers::pi / 180.0;
      const Eigen::Vector3d dir(std::cos(e) * std::cos(azimuth), std::cos(e) * std::sin(azimuth), std::sin(e));
      for (int k = 0; k < preset.distances; ++k) {
        const double radius = scene_extent * (k + 1) / preset.distances;
        TrajectoryCamera tc;
        tc.camera = look_at(radius * dir, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), preset.width,
                            preset.height, f, f);
        tc.direction = d;
        tc.elevation_deg = elevation;
        tc.distance = k;
        out.push_back(tc);
      }
    }
  }
  return out;
}

ImageRGBA ssaa_reference(const GaussianSet& gs, const Camera& cam, int k, const RasterConfig& cfg) {
  if (k < 1) raise(ErrorKind::kArgument, "supersampling factor must be >= 1");
  const Camera big = cam.supersampled(k);
  ImageRGBA out(cam.width, cam.height);
  // About 2^22 supersampled pixels per band.
  const int band_rows = std::max(1, (1 << 22) / std::max(1, big.width) / k);
  for (int y0 = 0; y0 < cam.height; y0 += band_rows) {
    const int rows = std::min(band_rows, cam.height - y0);
    Camera band = big;
    band.height = rows * k;
    band.cy = big.cy - static_cast<double>(y0) * k;
    const ImageRGBA small = downsample_box(render(gs, band, cfg), k);
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        for (int c = 0; c < 4; ++c) out.at(x, y0 + y, c) = small.at(x, y, c);
      }
    }
  }
  return out;
}

ImageRGBA ssaa_reference(const LoadedScene& scene, const Camera& cam, int k, const RasterConfig& cfg) {
  return ssaa_reference(gather(scene, select_finest(scene)), cam, k, cfg);
}

FrameResult render_lod_frame(const LoadedScene& scene, const Camera& cam, double tau, const SelectOptions& sel,
                             const RasterConfig& cfg) {
  const auto start = Clock::now();
  FrameResult f;
  f.selection = select_scene(scene, cam, tau, sel);
  f.image = render(gather(scene, f.selection), cam, cfg);
  f.total_ms = ms_since(start);
  return f;
}

FrameResult render_vanilla_frame(const LoadedScene& scene, const Camera& cam, const RasterConfig& cfg) {
  const auto start = Clock::now();
  FrameResult f;
  f.selection = select_finest(scene);
  f.image = render(gather(scene, f.selection), cam, cfg);
  f.total_ms = ms_since(start);
  return f;
}

std::vector<BenchRecord> run_bench(const LoadedScene& scene, const std::vector<double>& taus,
                                   const std::vector<TrajectoryCamera>& trajectory, const BenchOptions& opts) {
  std::vector<BenchRecord> records;
  records.reserve(trajectory.size() * taus.size());
  const GaussianSet vanilla_set = opts.measure_quality ? gather(scene, select_finest(scene)) : GaussianSet{};
  if (opts.png_dir) std::filesystem::create_directories(*opts.png_dir);

  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const TrajectoryCamera& tc = trajectory[i];
    const FrameResult vanilla = render_vanilla_frame(scene, tc.camera, opts.raster);
    ImageRGBA reference;
    double vanilla_psnr = 0.0;
    if (opts.measure_quality) {
      reference = ssaa_reference(vanilla_set, tc.camera, opts.ssaa, opts.raster);
      vanilla_psnr = psnr(vanilla.image, reference);
    }
    const std::string stem = "cam" + std::to_string(i);
    if (opts.png_dir) {
      write_png(vanilla.image, *opts.png_dir / (stem + "_vanilla.png"));
      if (opts.measure_quality) write_png(reference, *opts.png_dir / (stem + "_ssaa.png"));
    }
    for (double tau : taus) {
      const FrameResult ours = render_lod_frame(scene, tc.camera, tau, opts.select, opts.raster);
      BenchRecord r;
      r.direction = tc.direction;
      r.elevation = tc.elevation_deg;
      r.distance = tc.distance;
      r.tau = tau;
      r.sel_count = ours.selection.selected_count;
      r.vanilla_count = vanilla.selection.selected_count;
      r.percentage = r.vanilla_count == 0 ? 0.0
                                          : 100.0 * static_cast<double>(r.sel_count) / static_cast<double>(r.vanilla_count);
      r.ours_ms = ours.total_ms;
      r.vanilla_ms = vanilla.total_ms;
      if (opts.measure_quality) {
        r.ours_psnr = psnr(ours.image, reference);
        r.vanilla_psnr = vanilla_psnr;
      }
      if (opts.png_dir) {
        std::ostringstream name;
        name << stem << "_tau" << tau << ".png";
        write_png(ours.image, *opts.png_dir / name.str());
      }
      records.push_back(r);
    }
    if (opts.progress) opts.progress(i + 1, trajectory.size());
  }
  return records;
}

std::string bench_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  out << kBenchCsvHeader << '\n';
  out.precision(10);
  for (const BenchRecord& r : records) {
    out << r.direction << ',' << r.elevation << ',' << r.distance << ',' << r.tau << ',' << r.sel_count << ','
        << r.vanilla_count << ',' << r.percentage << ',' << r.ours_ms << ',' << r.vanilla_ms << ',' << r.ours_psnr
        << ',' << r.vanilla_psnr << '\n';
  }
  return out.str();
}

void write_bench_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& path) {
  const std::string text = bench_csv(records);
  write_file_atomic(path, text.data(), text.size());
}

GaussianSet synth_shell_asset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GaussianSet gs;
  gs.reserve(n);
  const double spacing = std::sqrt(4.0 * std::numbers::pi / static_cast<double>(std::max<std::size_t>(n, 1)));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 2.0 * unit(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d dir(rho * std::cos(phi), rho * std::sin(phi), z);
    const double shell = 1.0 + 0.02 * (unit(rng) - 0.5);

    // Local frame with the thin axis along the normal.
    const Eigen::Vector3d helper = std::abs(dir.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d t0 = helper.cross(dir).normalized();
    const Eigen::Vector3d t1 = dir.cross(t0);
    const double spin = 2.0 * std::numbers::pi * unit(rng);
    Eigen::Matrix3d frame;
    frame.col(0) = std::cos(spin) * t0 + std::sin(spin) * t1;
    frame.col(1) = dir.cross(frame.col(0));
    frame.col(2) = dir;
    const Eigen::Quaterniond q(frame);

    Gaussian3D g;
    g.position = (shell * dir).cast<float>();
    g.scale = Eigen::Vector3d(spacing * (0.5 + 0.7 * unit(rng)), spacing * (0.5 + 0.7 * unit(rng)),
                              0.15 * spacing)
                  .cast<float>();
    g.rotation = QuatWxyz(static_cast<float>(q.w()), static_cast<float>(q.x()), static_cast<float>(q.y()),
                          static_cast<float>(q.z()));
    g.rotation.normalize();
    g.opacity = static_cast<float>(0.35 + 0.6 * unit(rng));
    const double band = 0.5 + 0.5 * std::sin(6.0 * dir.z() + 3.0 * std::atan2(dir.y(), dir.x()));
    const double noise = 0.1 * (unit(rng) - 0.5);
    g.color = Eigen::Vector3d(0.15 + 0.8 * band + noise, 0.3 + 0.5 * (1.0 - band) + noise, 0.2 + 0.6 * rho)
                  .cwiseMax(0.0)
                  .cast<float>();
    gs.push_back(g);
  }
  return gs;
}

std::vector<Instance> grid_instances(const std::string& asset, int rows, int cols, double spacing, double min_scale,
                                     double max_scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Instance inst;
      inst.asset = asset;
      inst.translation = {(c - 0.5 * (cols - 1)) * spacing, (r - 0.5 * (rows - 1)) * spacing, 0.0};
      inst.rotation = quat_from_yaw(2.0 * std::numbers::pi * unit(rng));
      inst.scale = min_scale + (max_scale - min_scale) * unit(rng);
      out.push_back(inst);
    }
  }
  return out;
}

}  // namespace v3dg
