// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "v3dg/bundle.hpp"
#include "v3dg/diff_splat.hpp"
#include "v3dg/gaussian.hpp"

namespace v3dg {

inline constexpr double kDefaultScaleExpansion = 1.122462048309373;  // 2^(1/6)

/// Score used to pick survivors: opacity times the geometric mean of the
/// three scale components.
double downsample_score(const Gaussian3D& g);

/// Indices of the ceil(N/2) highest-scoring rows, ties to the lower index,
/// returned in ascending index order.
std::vector<std::size_t> downsample_indices(const GaussianSet& gs);

/// Keeps the top half by score and multiplies every surviving scale
/// component by `scale_expansion`. Other attributes are copied unchanged.
GaussianSet downsample_half(const GaussianSet& gs, double scale_expansion = kDefaultScaleExpansion);

/// Mean-position center, farthest-member radius, then inflated so the
/// sphere encloses every child own-sphere and its radius exceeds every
/// child radius by a relative 1e-4. The result is representable in float32
/// and still satisfies those bounds after rounding.
BoundingSphere compute_group_sphere(std::span<const Eigen::Vector3f> member_positions,
                                    std::span<const BoundingSphere> child_spheres);

/// Smallest float-representable sphere around `s`: the center rounded to
/// float and the radius rounded up far enough to keep enclosing `s`.
BoundingSphere round_sphere_outward(const BoundingSphere& s);

struct SimplifiedGroup {
  BoundingSphere sphere;          // own sphere of every produced cluster
  GaussianSet gaussians;          // ordered cluster by cluster
  std::vector<std::uint32_t> cluster_sizes;
  OptimizeReport report;
};

/// Downsamples the concatenated member Gaussians, refines them by local
/// splatting around the group sphere and splits the result into clusters
/// of at most `params.gaussians_per_cluster`.
SimplifiedGroup simplify_group(const GaussianSet& members, std::span<const BoundingSphere> child_spheres,
                               const BuildParams& params, std::uint64_t group_seed,
                               const LocalSplatOptions& opts = {});

/// Seed of the `group_id`-th simplified group of a build.
std::uint64_t group_seed(std::uint64_t build_seed, std::uint64_t group_id);

struct BuildProgress {
  std::uint32_t layer = 0;
  std::size_t groups_done = 0;
  std::size_t groups_total = 0;
};

struct BuildOptions {
  LocalSplatOptions splat;
  /// Called after each finished group, serialized across threads.
  std::function<void(const BuildProgress&)> progress;
  bool parallel_groups = true;
};

/// Offline build: median-split clusters form layer 0, then each layer with
/// at least `clusters_per_group` clusters is grouped, simplified group by
/// group and emitted as the next layer. Layer-0 rows are the input rows,
/// reordered cluster by cluster.
Bundle build_bundle(const GaussianSet& asset, const BuildParams& params, const BuildOptions& opts = {});

}  // namespace v3dg
