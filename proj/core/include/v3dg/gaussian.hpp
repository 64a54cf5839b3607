// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace v3dg {

/// Quaternion stored as (w, x, y, z), matching the PLY rot_0..rot_3 order.
using QuatWxyz = Eigen::Vector4f;

/// One splat primitive with activated attributes: per-axis standard
/// deviations, a unit rotation, opacity in (0, 1) and degree-0 linear RGB.
struct Gaussian3D {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  Eigen::Vector3f scale = Eigen::Vector3f::Ones();
  QuatWxyz rotation = QuatWxyz(1.f, 0.f, 0.f, 0.f);
  float opacity = 0.5f;
  Eigen::Vector3f color = Eigen::Vector3f::Constant(0.5f);

  bool operator==(const Gaussian3D&) const = default;
};

/// Checks the row invariants: unit quaternion (1e-6), positive scale,
/// opacity strictly inside (0, 1), non-negative color, finite values.
bool is_valid(const Gaussian3D& g) noexcept;

/// Columnar storage of N Gaussians. All arrays always have equal length.
class GaussianSet {
 public:
  GaussianSet() = default;
  explicit GaussianSet(std::size_t n) { resize(n); }

  std::size_t size() const noexcept { return positions.size(); }
  bool empty() const noexcept { return positions.empty(); }

  void resize(std::size_t n);
  void reserve(std::size_t n);
  void clear() { resize(0); }

  Gaussian3D get(std::size_t i) const;
  void set(std::size_t i, const Gaussian3D& g);
  void push_back(const Gaussian3D& g);

  /// Appends rows [offset, offset + count) of `other`.
  void append(const GaussianSet& other, std::size_t offset, std::size_t count);
  void append(const GaussianSet& other) { append(other, 0, other.size()); }

  /// Rows selected by `indices`, in that order.
  GaussianSet subset(std::span<const std::size_t> indices) const;
  GaussianSet slice(std::size_t offset, std::size_t count) const;

  bool operator==(const GaussianSet&) const = default;

  std::vector<Eigen::Vector3f> positions;
  std::vector<Eigen::Vector3f> scales;
  std::vector<QuatWxyz> rotations;
  std::vector<float> opacities;
  std::vector<Eigen::Vector3f> colors;
};

/// Index of the first row violating the Gaussian invariants, or size() when
/// every row is valid.
std::size_t first_invalid_row(const GaussianSet& gs) noexcept;

/// Rotation matrix of a (not necessarily normalized) wxyz quaternion.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q_wxyz);

inline Eigen::Matrix3d rotation_matrix(const QuatWxyz& q) {
  return rotation_matrix(Eigen::Vector4d(q.cast<double>()));
}

struct BoundingSphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;

  bool contains(const Eigen::Vector3d& p, double tolerance = 0.0) const {
    return (p - center).norm() <= radius + tolerance;
  }
  /// ‖c_other − c‖ + r_other ≤ r + tolerance.
  bool encloses(const BoundingSphere& other, double tolerance = 0.0) const {
    return (other.center - center).norm() + other.radius <= radius + tolerance;
  }

  bool operator==(const BoundingSphere&) const = default;
};

}  // namespace v3dg
