// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "v3dg/bundle.hpp"
#include "v3dg/camera.hpp"
#include "v3dg/rasterizer.hpp"
#include "v3dg/scene.hpp"

namespace v3dg {

/// Projected pixel area of a sphere, pi r² fx fy / z_v². +inf when the
/// camera-space depth of the center is below the radius (camera inside,
/// tangent, or sphere reaching behind the camera); 0 for r = 0.
double footprint(const BoundingSphere& sphere, const Camera& cam);

struct SelectOptions {
  /// Drop selected clusters whose bounds lie fully outside the view
  /// frustum. Applied after the LOD predicate.
  bool frustum_cull = false;
};

/// Conservative sphere around a cluster's Gaussians including their 3σ
/// extent, used for frustum culling.
BoundingSphere cluster_bounds(const Bundle& b, std::size_t cluster_id);

/// False when the sphere lies entirely outside one of the frustum side
/// planes or in front of the near plane.
bool sphere_in_frustum(const BoundingSphere& s, const Camera& cam, double near_plane = 0.01);

/// Ids (ascending) of the clusters satisfying F_c <= tau < F_p once both
/// spheres are moved by `inst`. Every cluster is tested independently.
std::vector<std::uint32_t> select(const Bundle& b, const Instance& inst, const Camera& cam, double tau,
                                  const SelectOptions& opts = {});

/// A scene with its bundles resident in memory.
struct LoadedScene {
  struct Asset {
    std::string id;
    std::shared_ptr<const Bundle> bundle;
    std::vector<BoundingSphere> bounds;  // per cluster, see cluster_bounds
  };
  std::vector<Asset> assets;
  std::vector<Instance> instances;
  std::vector<std::size_t> instance_asset;  // index into assets

  std::size_t resident_count() const;
  /// Axis-aligned box around every instance's layer-0 Gaussians.
  void bounding_box(Eigen::Vector3d& lo, Eigen::Vector3d& hi) const;
  /// Sphere enclosing every instance's top-layer spheres.
  BoundingSphere bounding_sphere() const;
};

/// Reads every bundle the scene references. Unknown asset ids raise a
/// reference error.
LoadedScene load_scene_bundles(const Scene& scene);
/// In-memory variant; `bundles` maps asset id to bundle.
LoadedScene make_loaded_scene(const std::vector<std::pair<std::string, std::shared_ptr<const Bundle>>>& bundles,
                              const std::vector<Instance>& instances);

struct SelectionResult {
  std::vector<std::vector<std::uint32_t>> clusters;  // per instance
  std::uint64_t selected_count = 0;
  std::uint64_t resident_count = 0;
  double select_ms = 0.0;

  double percentage() const {
    return resident_count == 0 ? 0.0 : 100.0 * static_cast<double>(selected_count) / static_cast<double>(resident_count);
  }
};

SelectionResult select_scene(const LoadedScene& scene, const Camera& cam, double tau, const SelectOptions& opts = {});

/// Every layer-0 cluster of every instance: the vanilla set.
SelectionResult select_finest(const LoadedScene& scene);

/// Selected clusters' Gaussians with each instance transform applied, in
/// instance order then cluster order. When `layers` is non-null it receives
/// the source layer of every row.
GaussianSet gather(const LoadedScene& scene, const SelectionResult& result,
                   std::vector<std::uint32_t>* layers = nullptr);

/// Keeps Gaussians whose projected 3σ radius, 3 sqrt(λmax(cov2d)), is at
/// least `clip` pixels. Gaussians culled by projection are dropped.
GaussianSet radius_clip_filter(const GaussianSet& gs, const Camera& cam, double clip, const RasterConfig& cfg = {});

}  // namespace v3dg
