// SPDX-License-Identifier: Apache-2.0
#include "v3dg/scene.hpp"

#include <cmath>

namespace v3dg {

bool Instance::is_identity() const noexcept {
  return scale == 1.0 && translation == Eigen::Vector3d::Zero() &&
         rotation == Eigen::Vector4d(1, 0, 0, 0);
}

bool Instance::is_valid() const noexcept {
  return std::isfinite(scale) && scale > 0 && translation.allFinite() &&
         rotation.allFinite() && std::abs(rotation.norm() - 1.0) <= 1e-6;
}

Eigen::Vector3d Instance::apply(const Eigen::Vector3d& p) const {
  return scale * (rotation_matrix(rotation) * p) + translation;
}

Eigen::Matrix4d Instance::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = scale * rotation_matrix(rotation);
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Instance compose(const Instance& first, const Instance& second) {
  Instance out;
  out.asset = first.asset;
  out.scale = second.scale * first.scale;
  out.rotation = quat_multiply(second.rotation, first.rotation).normalized();
  out.translation = second.apply(first.translation);
  return out;
}

Eigen::Vector4d quat_multiply(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  const double aw = a[0], ax = a[1], ay = a[2], az = a[3];
  const double bw = b[0], bx = b[1], by = b[2], bz = b[3];
  return {aw * bw - ax * bx - ay * by - az * bz,
          aw * bx + ax * bw + ay * bz - az * by,
          aw * by - ax * bz + ay * bw + az * bx,
          aw * bz + ax * by - ay * bx + az * bw};
}

Eigen::Vector4d quat_from_yaw(double radians) {
  return {std::cos(0.5 * radians), 0.0, 0.0, std::sin(0.5 * radians)};
}

namespace {

struct PreparedTransform {
  Eigen::Matrix3d linear;
  Eigen::Vector3d translation;
  Eigen::Vector4d rotation;
  double scale;

  explicit PreparedTransform(const Instance& inst)
      : linear(inst.scale * rotation_matrix(inst.rotation)),
        translation(inst.translation),
        rotation(inst.rotation),
        scale(inst.scale) {}

  Gaussian3D apply(const Gaussian3D& g) const {
    Gaussian3D out = g;
    out.position = (linear * g.position.cast<double>() + translation).cast<float>();
    out.rotation = quat_multiply(rotation, g.rotation.cast<double>()).normalized().cast<float>();
    out.scale = (scale * g.scale.cast<double>()).cast<float>();
    return out;
  }
};

}  // namespace

Gaussian3D transform_gaussian(const Gaussian3D& g, const Instance& inst) {
  if (inst.is_identity()) return g;
  return PreparedTransform(inst).apply(g);
}

GaussianSet transform_gaussians(const GaussianSet& gs, const Instance& inst) {
  if (inst.is_identity()) return gs;
  const PreparedTransform xf(inst);
  GaussianSet out(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) out.set(i, xf.apply(gs.get(i)));
  return out;
}

BoundingSphere transform_sphere(const BoundingSphere& s, const Instance& inst) {
  if (inst.is_identity()) return s;
  return {inst.apply(s.center), inst.scale * s.radius};
}

}  // namespace v3dg
