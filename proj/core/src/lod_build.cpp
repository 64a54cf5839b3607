// SPDX-License-Identifier: Apache-2.0
#include "v3dg/lod_build.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include <tbb/parallel_for.h>

#include "v3dg/clustering.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

namespace {

// Smallest float >= x.
float round_up(double x) {
  float f = static_cast<float>(x);
  while (static_cast<double>(f) < x) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

// GCC 11 -O2 SLP vectorization folds double->float->double away for the
// first two lanes; the volatile store forces the narrowing.
Eigen::Vector3d round_center(const Eigen::Vector3d& c) {
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    volatile float f = static_cast<float>(c[i]);
    out[i] = static_cast<double>(f);
  }
  return out;
}

Eigen::Vector3d centroid(const GaussianSet& gs, std::size_t offset, std::size_t count) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (std::size_t i = offset; i < offset + count; ++i) sum += gs.positions[i].cast<double>();
  return sum / static_cast<double>(count);
}

}  // namespace

double downsample_score(const Gaussian3D& g) {
  const Eigen::Vector3d s = g.scale.cast<double>();
  return static_cast<double>(g.opacity) * std::cbrt(s.x() * s.y() * s.z());
}

std::vector<std::size_t> downsample_indices(const GaussianSet& gs) {
  const std::size_t n = gs.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = downsample_score(gs.get(i));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep = (n + 1) / 2;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return score[a] != score[b] ? score[a] > score[b] : a < b;
                    });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

GaussianSet downsample_half(const GaussianSet& gs, double scale_expansion) {
  GaussianSet out = gs.subset(downsample_indices(gs));
  for (auto& s : out.scales) s = (s.cast<double>() * scale_expansion).cast<float>();
  return out;
}

BoundingSphere round_sphere_outward(const BoundingSphere& s) {
  BoundingSphere out;
  out.center = round_center(s.center);
  out.radius = round_up((out.center - s.center).norm() + s.radius);
  return out;
}

BoundingSphere compute_group_sphere(std::span<const Eigen::Vector3f> member_positions,
                                    std::span<const BoundingSphere> child_spheres) {
  if (member_positions.empty()) raise(ErrorKind::kArgument, "group sphere needs at least one member");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : member_positions) sum += p.cast<double>();
  // Distances are measured from the float-rounded center so the stored
  // sphere satisfies every bound exactly.
  const Eigen::Vector3d center = round_center(sum / static_cast<double>(member_positions.size()));

  double radius = 0.0;
  for (const auto& p : member_positions) radius = std::max(radius, (p.cast<double>() - center).norm());
  for (const auto& child : child_spheres) {
    radius = std::max(radius, (child.center - center).norm() + child.radius);
    radius = std::max(radius, child.radius * (1.0 + 1e-4));
  }
  // A group of coincident points still needs a positive radius so its
  // parent can be strictly larger than r = 0 children.
  const double floor = 1e-6 * std::max(1.0, center.cwiseAbs().maxCoeff());
  radius = std::max(radius, floor);
  return {center, round_up(radius)};
}

std::uint64_t group_seed(std::uint64_t build_seed, std::uint64_t group_id) { return build_seed ^ group_id; }

SimplifiedGroup simplify_group(const GaussianSet& members, std::span<const BoundingSphere> child_spheres,
                               const BuildParams& params, std::uint64_t seed, const LocalSplatOptions& opts) {
  if (members.empty()) raise(ErrorKind::kArgument, "cannot simplify an empty group");
  SimplifiedGroup out;
  out.sphere = compute_group_sphere(members.positions, child_spheres);
  const GaussianSet init = downsample_half(members, params.scale_expansion);
  const GaussianSet simplified =
      optimize_group(members, init, params.simplify_iterations, seed, out.sphere, opts, &out.report);

  const Partition leaves = median_split(std::span<const Eigen::Vector3f>(simplified.positions),
                                        params.gaussians_per_cluster);
  out.gaussians.reserve(simplified.size());
  for (const auto& leaf : leaves) {
    out.gaussians.append(simplified.subset(leaf));
    out.cluster_sizes.push_back(static_cast<std::uint32_t>(leaf.size()));
  }
  return out;
}

Bundle build_bundle(const GaussianSet& asset, const BuildParams& params, const BuildOptions& opts) {
  params.validate();
  if (asset.empty()) raise(ErrorKind::kValidation, "cannot build a bundle from an empty asset");
  if (const std::size_t bad = first_invalid_row(asset); bad != asset.size()) {
    raise(ErrorKind::kValidation, "asset row " + std::to_string(bad) + " violates the Gaussian invariants");
  }

  Bundle b;
  b.params = params;
  b.gaussians.reserve(2 * asset.size());

  const Partition leaves =
      median_split(std::span<const Eigen::Vector3f>(asset.positions), params.gaussians_per_cluster);
  std::vector<std::size_t> layer_ids;
  for (const auto& leaf : leaves) {
    Cluster c;
    c.layer = 0;
    c.count = static_cast<std::uint32_t>(leaf.size());
    c.offset = b.gaussians.size();
    b.gaussians.append(asset.subset(leaf));
    c.own = {round_center(centroid(b.gaussians, c.offset, c.count)), 0.0};
    layer_ids.push_back(b.clusters.size());
    b.clusters.push_back(c);
  }

  std::uint32_t layer = 0;
  std::uint64_t next_group_id = 0;
  std::mutex progress_mutex;
  while (layer_ids.size() >= params.clusters_per_group) {
    std::vector<Eigen::Vector3d> centroids;
    centroids.reserve(layer_ids.size());
    for (std::size_t id : layer_ids) {
      centroids.push_back(centroid(b.gaussians, b.clusters[id].offset, b.clusters[id].count));
    }
    const Partition groups = group_clusters(centroids, params.clusters_per_group);

    std::vector<SimplifiedGroup> results(groups.size());
    std::size_t done = 0;
    auto run_group = [&](std::size_t g) {
      GaussianSet members;
      std::vector<BoundingSphere> children;
      for (std::size_t k : groups[g]) {
        const Cluster& c = b.clusters[layer_ids[k]];
        members.append(b.gaussians, c.offset, c.count);
        children.push_back(c.own);
      }
      results[g] = simplify_group(members, children, params, group_seed(params.seed, next_group_id + g),
                                  opts.splat);
      if (opts.progress) {
        std::lock_guard lock(progress_mutex);
        opts.progress({layer, ++done, groups.size()});
      }
    };
    if (opts.parallel_groups) {
      tbb::parallel_for(std::size_t{0}, groups.size(), run_group);
    } else {
      for (std::size_t g = 0; g < groups.size(); ++g) run_group(g);
    }

    std::vector<std::size_t> next_ids;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const SimplifiedGroup& r = results[g];
      for (std::size_t k : groups[g]) b.clusters[layer_ids[k]].parent = r.sphere;
      std::uint64_t offset = b.gaussians.size();
      b.gaussians.append(r.gaussians);
      for (std::uint32_t size : r.cluster_sizes) {
        Cluster c;
        c.layer = layer + 1;
        c.count = size;
        c.offset = offset;
        c.own = r.sphere;
        offset += size;
        next_ids.push_back(b.clusters.size());
        b.clusters.push_back(c);
      }
    }
    next_group_id += groups.size();
    layer_ids = std::move(next_ids);
    ++layer;
  }

  for (std::size_t id : layer_ids) {
    b.clusters[id].parent = {b.clusters[id].own.center, kInfiniteRadius};
  }
  b.layer_count = layer + 1;
  return b;
}

}  // namespace v3dg
