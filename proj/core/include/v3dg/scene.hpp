// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "v3dg/gaussian.hpp"

namespace v3dg {

/// Rigid placement of an asset with uniform scale:
/// x -> scale * R(rotation) * x + translation.
struct Instance {
  std::string asset;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0);  // wxyz, unit
  double scale = 1.0;

  bool is_identity() const noexcept;
  bool is_valid() const noexcept;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  /// Homogeneous 4x4 form of the similarity transform.
  Eigen::Matrix4d matrix() const;

  bool operator==(const Instance&) const = default;
};

/// Instance equivalent to applying `first`, then `second`. The asset id of
/// `first` is kept.
Instance compose(const Instance& first, const Instance& second);

/// Hamilton product a ∘ b of wxyz quaternions.
Eigen::Vector4d quat_multiply(const Eigen::Vector4d& a, const Eigen::Vector4d& b);

/// Rotation about the world z axis.
Eigen::Vector4d quat_from_yaw(double radians);

Gaussian3D transform_gaussian(const Gaussian3D& g, const Instance& inst);
/// Applies `inst` to every row.
GaussianSet transform_gaussians(const GaussianSet& gs, const Instance& inst);
BoundingSphere transform_sphere(const BoundingSphere& s, const Instance& inst);

struct Scene {
  std::map<std::string, std::filesystem::path> assets;  // id -> bundle path
  std::vector<Instance> instances;
};

}  // namespace v3dg
