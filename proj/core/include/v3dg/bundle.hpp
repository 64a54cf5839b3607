// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "v3dg/gaussian.hpp"

namespace v3dg {

/// Knobs of the offline build. Defaults are the basic 4096 x 2 setting with
/// 640 local-splatting iterations.
struct BuildParams {
  std::uint32_t gaussians_per_cluster = 4096;
  std::uint32_t clusters_per_group = 2;
  std::uint32_t simplify_iterations = 640;
  double scale_expansion = 1.122462048309373;  // 2^(1/6)
  std::uint64_t seed = 0;

  /// Throws a validation error describing the first violated bound.
  void validate() const;

  bool operator==(const BuildParams&) const = default;
};

/// Contiguous range of bundle Gaussians forming one LOD unit, together with
/// the sphere of the group that produced it (own) and the sphere of the
/// group that contains it (parent, radius +inf on the top layer).
struct Cluster {
  std::uint32_t layer = 0;
  std::uint32_t count = 0;
  std::uint64_t offset = 0;
  BoundingSphere own;
  BoundingSphere parent;

  bool is_top() const noexcept { return std::isinf(parent.radius); }
  bool operator==(const Cluster&) const = default;
};

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

struct Bundle {
  static constexpr std::uint32_t kFormatVersion = 1;

  BuildParams params;
  std::uint32_t layer_count = 0;
  GaussianSet gaussians;           // all layers, concatenated
  std::vector<Cluster> clusters;   // ordered by layer, then by offset

  std::vector<std::size_t> clusters_in_layer(std::uint32_t layer) const;
  std::size_t gaussians_in_layer(std::uint32_t layer) const;
  GaussianSet layer_gaussians(std::uint32_t layer) const;
  GaussianSet cluster_gaussians(std::size_t cluster_id) const;

  bool operator==(const Bundle&) const = default;
};

/// Every invariant violation found in `b`, each message naming the
/// invariant. Empty when the bundle is valid.
std::vector<std::string> validate_bundle(const Bundle& b);

/// Exact size in bytes of the serialized form.
std::uint64_t serialized_size(std::uint64_t cluster_count, std::uint64_t gaussian_count);

std::vector<std::uint8_t> serialize_bundle(const Bundle& b);
/// Throws format (magic/version), I/O (truncation) or corruption (checksum,
/// invariants) errors.
Bundle deserialize_bundle(const std::vector<std::uint8_t>& bytes);

void write_bundle(const Bundle& b, const std::filesystem::path& path);
Bundle read_bundle(const std::filesystem::path& path);

/// Writes through a sibling temporary file renamed into place on success.
void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size);

}  // namespace v3dg
