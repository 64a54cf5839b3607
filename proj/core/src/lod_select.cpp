// SPDX-License-Identifier: Apache-2.0
#include "v3dg/lod_select.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "v3dg/error.hpp"

namespace v3dg {

double footprint(const BoundingSphere& sphere, const Camera& cam) {
  if (sphere.radius == 0.0) return 0.0;
  const double z = cam.to_camera(sphere.center).z();
  if (!(z >= sphere.radius)) return std::numeric_limits<double>::infinity();
  const double r = sphere.radius;
  return std::numbers::pi * r * r * cam.fx * cam.fy / (z * z);
}

BoundingSphere cluster_bounds(const Bundle& b, std::size_t cluster_id) {
  const Cluster& c = b.clusters.at(cluster_id);
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (std::size_t i = c.offset; i < c.offset + c.count; ++i) center += b.gaussians.positions[i].cast<double>();
  if (c.count > 0) center /= static_cast<double>(c.count);
  double radius = 0.0;
  for (std::size_t i = c.offset; i < c.offset + c.count; ++i) {
    const double extent = 3.0 * static_cast<double>(b.gaussians.scales[i].maxCoeff());
    radius = std::max(radius, (b.gaussians.positions[i].cast<double>() - center).norm() + extent);
  }
  return {center, radius};
}

bool sphere_in_frustum(const BoundingSphere& s, const Camera& cam, double near_plane) {
  const Eigen::Vector3d c = cam.to_camera(s.center);
  const double r = s.radius;
  if (c.z() + r <= near_plane) return false;
  // Side planes through the camera center, inward normals.
  const Eigen::Vector3d planes[4] = {
      {cam.fx, 0.0, cam.cx},
      {-cam.fx, 0.0, cam.width - cam.cx},
      {0.0, cam.fy, cam.cy},
      {0.0, -cam.fy, cam.height - cam.cy},
  };
  for (const auto& n : planes) {
    if (n.dot(c) / n.norm() < -r) return false;
  }
  return true;
}

namespace {

std::vector<std::uint32_t> select_impl(const Bundle& b, const std::vector<BoundingSphere>* bounds,
                                       const Instance& inst, const Camera& cam, double tau,
                                       const SelectOptions& opts) {
  const std::size_t n = b.clusters.size();
  std::vector<char> keep(n, 0);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 256), [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) {
      const Cluster& c = b.clusters[i];
      const double f_own = footprint(transform_sphere(c.own, inst), cam);
      if (!(f_own <= tau)) continue;
      const double f_parent = footprint(transform_sphere(c.parent, inst), cam);
      if (!(tau < f_parent)) continue;
      if (opts.frustum_cull) {
        const BoundingSphere local = bounds ? (*bounds)[i] : cluster_bounds(b, i);
        if (!sphere_in_frustum(transform_sphere(local, inst), cam)) continue;
      }
      keep[i] = 1;
    }
  });
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) ids.push_back(static_cast<std::uint32_t>(i));
  }
  return ids;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::vector<std::uint32_t> select(const Bundle& b, const Instance& inst, const Camera& cam, double tau,
                                  const SelectOptions& opts) {
  return select_impl(b, nullptr, inst, cam, tau, opts);
}

std::size_t LoadedScene::resident_count() const {
  std::size_t n = 0;
  for (std::size_t a : instance_asset) n += assets[a].bundle->gaussians_in_layer(0);
  return n;
}

void LoadedScene::bounding_box(Eigen::Vector3d& lo, Eigen::Vector3d& hi) const {
  lo.setConstant(std::numeric_limits<double>::infinity());
  hi.setConstant(-std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Bundle& b = *assets[instance_asset[k]].bundle;
    for (const Cluster& c : b.clusters) {
      if (c.layer != 0) continue;
      for (std::size_t i = c.offset; i < c.offset + c.count; ++i) {
        const Eigen::Vector3d p = instances[k].apply(b.gaussians.positions[i].cast<double>());
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  }
}

BoundingSphere LoadedScene::bounding_sphere() const {
  std::vector<BoundingSphere> tops;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Bundle& b = *assets[instance_asset[k]].bundle;
    for (std::size_t i = 0; i < b.clusters.size(); ++i) {
      if (!b.clusters[i].is_top()) continue;
      const Cluster& c = b.clusters[i];
      // Single-layer bundles have r = 0 own spheres; use the Gaussian bounds.
      const BoundingSphere s = c.own.radius > 0.0 ? c.own : assets[instance_asset[k]].bounds[i];
      tops.push_back(transform_sphere(s, instances[k]));
    }
  }
  if (tops.empty()) return {};
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (const auto& s : tops) center += s.center;
  center /= static_cast<double>(tops.size());
  double radius = 0.0;
  for (const auto& s : tops) radius = std::max(radius, (s.center - center).norm() + s.radius);
  return {center, radius};
}

LoadedScene make_loaded_scene(const std::vector<std::pair<std::string, std::shared_ptr<const Bundle>>>& bundles,
                              const std::vector<Instance>& instances) {
  LoadedScene scene;
  for (const auto& [id, bundle] : bundles) {
    LoadedScene::Asset a;
    a.id = id;
    a.bundle = bundle;
    a.bounds.resize(bundle->clusters.size());
    for (std::size_t i = 0; i < a.bounds.size(); ++i) a.bounds[i] = cluster_bounds(*bundle, i);
    scene.assets.push_back(std::move(a));
  }
  for (const Instance& inst : instances) {
    std::size_t idx = scene.assets.size();
    for (std::size_t a = 0; a < scene.assets.size(); ++a) {
      if (scene.assets[a].id == inst.asset) idx = a;
    }
    if (idx == scene.assets.size()) raise(ErrorKind::kReference, "unknown asset id '" + inst.asset + "'");
    scene.instances.push_back(inst);
    scene.instance_asset.push_back(idx);
  }
  return scene;
}

LoadedScene load_scene_bundles(const Scene& scene) {
  std::vector<std::pair<std::string, std::shared_ptr<const Bundle>>> bundles;
  for (const auto& [id, path] : scene.assets) {
    bool used = false;
    for (const Instance& inst : scene.instances) used = used || inst.asset == id;
    if (used) bundles.emplace_back(id, std::make_shared<const Bundle>(read_bundle(path)));
  }
  return make_loaded_scene(bundles, scene.instances);
}

SelectionResult select_scene(const LoadedScene& scene, const Camera& cam, double tau, const SelectOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  SelectionResult r;
  r.clusters.resize(scene.instances.size());
  for (std::size_t k = 0; k < scene.instances.size(); ++k) {
    const auto& asset = scene.assets[scene.instance_asset[k]];
    r.clusters[k] = select_impl(*asset.bundle, &asset.bounds, scene.instances[k], cam, tau, opts);
  }
  r.select_ms = elapsed_ms(start);
  for (std::size_t k = 0; k < scene.instances.size(); ++k) {
    const Bundle& b = *scene.assets[scene.instance_asset[k]].bundle;
    for (std::uint32_t id : r.clusters[k]) r.selected_count += b.clusters[id].count;
  }
  r.resident_count = scene.resident_count();
  return r;
}

SelectionResult select_finest(const LoadedScene& scene) {
  const auto start = std::chrono::steady_clock::now();
  SelectionResult r;
  r.clusters.resize(scene.instances.size());
  for (std::size_t k = 0; k < scene.instances.size(); ++k) {
    const Bundle& b = *scene.assets[scene.instance_asset[k]].bundle;
    for (std::size_t i = 0; i < b.clusters.size(); ++i) {
      if (b.clusters[i].layer == 0) {
        r.clusters[k].push_back(static_cast<std::uint32_t>(i));
        r.selected_count += b.clusters[i].count;
      }
    }
  }
  r.resident_count = r.selected_count;
  r.select_ms = elapsed_ms(start);
  return r;
}

GaussianSet gather(const LoadedScene& scene, const SelectionResult& result, std::vector<std::uint32_t>* layers) {
  struct Piece {
    std::size_t instance;
    std::uint32_t cluster;
    std::size_t dst;
  };
  std::vector<Piece> pieces;
  std::size_t total = 0;
  for (std::size_t k = 0; k < result.clusters.size(); ++k) {
    const Bundle& b = *scene.assets.at(scene.instance_asset.at(k)).bundle;
    for (std::uint32_t id : result.clusters[k]) {
      pieces.push_back({k, id, total});
      total += b.clusters.at(id).count;
    }
  }
  GaussianSet out;
  out.resize(total);
  if (layers) layers->assign(total, 0);
  tbb::parallel_for(std::size_t{0}, pieces.size(), [&](std::size_t p) {
    const Piece& piece = pieces[p];
    const Instance& inst = scene.instances[piece.instance];
    const Bundle& b = *scene.assets[scene.instance_asset[piece.instance]].bundle;
    const Cluster& c = b.clusters[piece.cluster];
    const bool identity = inst.is_identity();
    for (std::size_t i = 0; i < c.count; ++i) {
      const Gaussian3D g = b.gaussians.get(c.offset + i);
      out.set(piece.dst + i, identity ? g : transform_gaussian(g, inst));
      if (layers) (*layers)[piece.dst + i] = c.layer;
    }
  });
  return out;
}

GaussianSet radius_clip_filter(const GaussianSet& gs, const Camera& cam, double clip, const RasterConfig& cfg) {
  std::vector<char> keep(gs.size(), 0);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, gs.size(), 4096), [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) {
      const auto s = project(gs.get(i), cam, cfg);
      if (!s) continue;
      const double a = s->cov(0, 0), b = s->cov(0, 1), c = s->cov(1, 1);
      const double mid = 0.5 * (a + c);
      const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - (a * c - b * b)));
      const double radius = cfg.extent_sigmas * std::sqrt(lambda_max);
      const bool on_screen = s->mean.x() + radius >= 0.0 && s->mean.x() - radius <= cam.width &&
                             s->mean.y() + radius >= 0.0 && s->mean.y() - radius <= cam.height;
      keep[i] = on_screen && radius >= clip ? 1 : 0;
    }
  });
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) idx.push_back(i);
  }
  return gs.subset(idx);
}

}  // namespace v3dg
