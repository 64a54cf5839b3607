// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "v3dg/camera.hpp"
#include "v3dg/gaussian.hpp"
#include "v3dg/rasterizer.hpp"

namespace v3dg::detail {

/// Intermediates of the EWA projection of one Gaussian, kept so the
/// backward pass can reuse them.
struct ProjectionTerms {
  Eigen::Vector3d cam_mean;           // t = W p + translation
  Eigen::Matrix<double, 2, 3> jac;    // J, perspective Jacobian at t
  Eigen::Matrix<double, 2, 3> jw;     // J W
  Eigen::Matrix3d rot;                // R(q)
  Eigen::Vector3d scale;
  Eigen::Matrix3d sigma;              // R diag(s²) Rᵀ
  Eigen::Matrix2d cov;
  Eigen::Vector2d mean;
};

/// Fills `out` and returns true unless the mean is at or behind the near
/// plane. The covariance may still be degenerate.
inline bool project_terms(const Eigen::Vector3f& position, const Eigen::Vector3f& scale,
                          const QuatWxyz& rotation, const Camera& cam, const RasterConfig& cfg,
                          ProjectionTerms& out) {
  out.cam_mean = cam.rotation * position.cast<double>() + cam.translation;
  const double tz = out.cam_mean.z();
  if (!(tz > cfg.near_plane)) return false;
  const double tx = out.cam_mean.x();
  const double ty = out.cam_mean.y();
  const double inv_z = 1.0 / tz;

  out.mean = {cam.fx * tx * inv_z + cam.cx, cam.fy * ty * inv_z + cam.cy};
  out.jac << cam.fx * inv_z, 0.0, -cam.fx * tx * inv_z * inv_z,
             0.0, cam.fy * inv_z, -cam.fy * ty * inv_z * inv_z;
  out.jw = out.jac * cam.rotation;

  out.rot = rotation_matrix(rotation);
  out.scale = scale.cast<double>();
  const Eigen::Matrix3d rs = out.rot * out.scale.asDiagonal();
  out.sigma = rs * rs.transpose();
  out.cov = out.jw * out.sigma * out.jw.transpose();
  return true;
}

}  // namespace v3dg::detail
