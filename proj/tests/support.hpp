// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "v3dg/bundle.hpp"
#include "v3dg/camera.hpp"
#include "v3dg/gaussian.hpp"
#include "v3dg/lod_build.hpp"

namespace v3dg::test {

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::Vector3d unit_vector(std::mt19937_64& rng) {
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(1.0 - z * z);
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline QuatWxyz random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  QuatWxyz f = q.cast<float>();
  f.normalize();
  return f;
}

inline Gaussian3D random_gaussian(std::mt19937_64& rng, double spread = 1.0, double min_scale = 0.02,
                                  double max_scale = 0.2) {
  Gaussian3D g;
  g.position = Eigen::Vector3d(uniform(rng, -spread, spread), uniform(rng, -spread, spread),
                               uniform(rng, -spread, spread))
                   .cast<float>();
  g.scale = Eigen::Vector3d(uniform(rng, min_scale, max_scale), uniform(rng, min_scale, max_scale),
                            uniform(rng, min_scale, max_scale))
                .cast<float>();
  g.rotation = random_quat(rng);
  g.opacity = static_cast<float>(uniform(rng, 0.05, 0.95));
  g.color = Eigen::Vector3d(uniform(rng), uniform(rng), uniform(rng)).cast<float>();
  return g;
}

inline GaussianSet random_set(std::size_t n, std::uint64_t seed, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  GaussianSet gs;
  for (std::size_t i = 0; i < n; ++i) gs.push_back(random_gaussian(rng, spread));
  return gs;
}

/// Camera on a sphere of `distance` around `target`, looking at it.
inline Camera orbit_camera(std::mt19937_64& rng, const Eigen::Vector3d& target, double distance, int w, int h,
                           double f) {
  const Eigen::Vector3d dir = unit_vector(rng);
  const Eigen::Vector3d up = std::abs(dir.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
  return look_at(target + distance * dir, target, up, w, h, f, f);
}

/// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("v3dg_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small bundle built without optimization, cheap enough for property loops.
inline Bundle quick_bundle(std::size_t n, std::uint32_t cluster_size, std::uint32_t group_size, std::uint64_t seed,
                           std::uint32_t iterations = 0) {
  BuildParams p;
  p.gaussians_per_cluster = cluster_size;
  p.clusters_per_group = group_size;
  p.simplify_iterations = iterations;
  p.seed = seed;
  return build_bundle(random_set(n, seed), p);
}

}  // namespace v3dg::test
