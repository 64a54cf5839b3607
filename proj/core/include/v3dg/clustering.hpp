// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace v3dg {

/// Disjoint, covering index sets over an input collection.
using Partition = std::vector<std::vector<std::size_t>>;

/// Recursive binary median split. Each node splits along the axis of its
/// largest bounding-box extent; the lower ceil(n/2) elements (ordered by
/// coordinate, then index) form the first child. Recursion stops once a
/// node holds at most `max_leaf_size` elements. Leaves come back in
/// depth-first order, lower child first.
Partition median_split(std::span<const Eigen::Vector3f> points, std::size_t max_leaf_size);
Partition median_split(std::span<const Eigen::Vector3d> points, std::size_t max_leaf_size);

/// Groups clusters by running the median split on their centroids with
/// `group_size` as the leaf bound.
Partition group_clusters(std::span<const Eigen::Vector3d> centroids, std::size_t group_size);

/// True when the sets are non-empty, disjoint and cover [0, n).
bool is_partition_of(const Partition& p, std::size_t n);

}  // namespace v3dg
