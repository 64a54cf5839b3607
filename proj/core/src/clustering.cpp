// SPDX-License-Identifier: Apache-2.0
#include "v3dg/clustering.hpp"

#include <algorithm>
#include <numeric>

#include "v3dg/error.hpp"

namespace v3dg {

namespace {

template <typename Vec>
void split_node(std::span<const Vec> points, std::span<std::size_t> indices,
                std::size_t max_leaf_size, Partition& out) {
  if (indices.size() <= max_leaf_size) {
    out.emplace_back(indices.begin(), indices.end());
    return;
  }

  Vec lo = points[indices.front()];
  Vec hi = lo;
  for (std::size_t i : indices) {
    lo = lo.cwiseMin(points[i]);
    hi = hi.cwiseMax(points[i]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);

  const std::size_t lower = (indices.size() + 1) / 2;
  auto less = [&](std::size_t a, std::size_t b) {
    const auto pa = points[a][axis];
    const auto pb = points[b][axis];
    return pa < pb || (pa == pb && a < b);
  };
  std::nth_element(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(lower),
                   indices.end(), less);
  // Keep each child in index order so leaves are independent of the
  // nth_element implementation.
  std::sort(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(lower));
  std::sort(indices.begin() + static_cast<std::ptrdiff_t>(lower), indices.end());

  split_node(points, indices.first(lower), max_leaf_size, out);
  split_node(points, indices.subspan(lower), max_leaf_size, out);
}

template <typename Vec>
Partition median_split_impl(std::span<const Vec> points, std::size_t max_leaf_size) {
  if (points.empty()) raise(ErrorKind::kArgument, "median_split: empty input");
  if (max_leaf_size < 1) raise(ErrorKind::kArgument, "median_split: max leaf size must be >= 1");
  std::vector<std::size_t> indices(points.size());
  std::iota(indices.begin(), indices.end(), 0);
  Partition out;
  split_node(points, std::span<std::size_t>(indices), max_leaf_size, out);
  return out;
}

}  // namespace

Partition median_split(std::span<const Eigen::Vector3f> points, std::size_t max_leaf_size) {
  return median_split_impl(points, max_leaf_size);
}

Partition median_split(std::span<const Eigen::Vector3d> points, std::size_t max_leaf_size) {
  return median_split_impl(points, max_leaf_size);
}

Partition group_clusters(std::span<const Eigen::Vector3d> centroids, std::size_t group_size) {
  if (group_size < 2) raise(ErrorKind::kArgument, "group_clusters: group size must be >= 2");
  return median_split(centroids, group_size);
}

bool is_partition_of(const Partition& p, std::size_t n) {
  std::vector<char> seen(n, 0);
  std::size_t total = 0;
  for (const auto& set : p) {
    if (set.empty()) return false;
    for (std::size_t i : set) {
      if (i >= n || seen[i]) return false;
      seen[i] = 1;
      ++total;
    }
  }
  return total == n;
}

}  // namespace v3dg
