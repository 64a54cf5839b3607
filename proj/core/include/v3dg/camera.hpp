// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace v3dg {

/// Pinhole camera with pixel-unit intrinsics. Camera space follows the
/// x-right, y-down, z-forward convention; pixel (i, j) has its center at
/// (i + 0.5, j + 0.5).
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // world -> camera
  int width = 1;
  int height = 1;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }
  Eigen::Vector3d position() const { return -rotation.transpose() * translation; }
  /// World-space viewing direction (camera +z).
  Eigen::Vector3d forward() const { return rotation.row(2).transpose(); }

  /// Same pose with resolution and focal lengths multiplied by k.
  Camera supersampled(int k) const;

  bool is_valid() const noexcept;

  bool operator==(const Camera&) const = default;
};

/// Camera at `eye` looking at `target`. `up` only needs to be non-parallel
/// to the viewing direction.
Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               const Eigen::Vector3d& up, int width, int height, double fx, double fy);

/// Focal length in pixels for a horizontal field of view.
double focal_from_fov_x(double fov_x, int width);

}  // namespace v3dg
