// SPDX-License-Identifier: Apache-2.0
#include "v3dg/camera.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "v3dg/error.hpp"

namespace v3dg {

Camera Camera::supersampled(int k) const {
  Camera c = *this;
  c.width = width * k;
  c.height = height * k;
  c.fx = fx * k;
  c.fy = fy * k;
  c.cx = cx * k;
  c.cy = cy * k;
  return c;
}

bool Camera::is_valid() const noexcept {
  if (!(fx > 0 && fy > 0) || width < 1 || height < 1) return false;
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= 1e-6;
}

Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               const Eigen::Vector3d& up, int width, int height, double fx, double fy) {
  const Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d right = fwd.cross(up);
  if (!fwd.allFinite() || right.norm() < 1e-12) {
    raise(ErrorKind::kArgument, "look_at: degenerate eye/target/up");
  }
  right.normalize();
  const Eigen::Vector3d down = fwd.cross(right);

  Camera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = fwd.transpose();
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

double focal_from_fov_x(double fov_x, int width) {
  return 0.5 * width / std::tan(0.5 * fov_x);
}

}  // namespace v3dg
