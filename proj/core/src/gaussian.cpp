// SPDX-License-Identifier: Apache-2.0
#include "v3dg/gaussian.hpp"

#include <cmath>

namespace v3dg {

bool is_valid(const Gaussian3D& g) noexcept {
  if (!g.position.allFinite() || !g.scale.allFinite() || !g.rotation.allFinite() ||
      !g.color.allFinite() || !std::isfinite(g.opacity)) {
    return false;
  }
  if (std::abs(g.rotation.cast<double>().norm() - 1.0) > 1e-6) return false;
  if ((g.scale.array() <= 0.f).any()) return false;
  if (!(g.opacity > 0.f && g.opacity < 1.f)) return false;
  return (g.color.array() >= 0.f).all();
}

void GaussianSet::resize(std::size_t n) {
  positions.resize(n, Eigen::Vector3f::Zero());
  scales.resize(n, Eigen::Vector3f::Ones());
  rotations.resize(n, QuatWxyz(1.f, 0.f, 0.f, 0.f));
  opacities.resize(n, 0.5f);
  colors.resize(n, Eigen::Vector3f::Constant(0.5f));
}

void GaussianSet::reserve(std::size_t n) {
  positions.reserve(n);
  scales.reserve(n);
  rotations.reserve(n);
  opacities.reserve(n);
  colors.reserve(n);
}

Gaussian3D GaussianSet::get(std::size_t i) const {
  return Gaussian3D{positions[i], scales[i], rotations[i], opacities[i], colors[i]};
}

void GaussianSet::set(std::size_t i, const Gaussian3D& g) {
  positions[i] = g.position;
  scales[i] = g.scale;
  rotations[i] = g.rotation;
  opacities[i] = g.opacity;
  colors[i] = g.color;
}

void GaussianSet::push_back(const Gaussian3D& g) {
  positions.push_back(g.position);
  scales.push_back(g.scale);
  rotations.push_back(g.rotation);
  opacities.push_back(g.opacity);
  colors.push_back(g.color);
}

void GaussianSet::append(const GaussianSet& other, std::size_t offset, std::size_t count) {
  auto copy = [&](auto& dst, const auto& src) {
    dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(offset),
               src.begin() + static_cast<std::ptrdiff_t>(offset + count));
  };
  copy(positions, other.positions);
  copy(scales, other.scales);
  copy(rotations, other.rotations);
  copy(opacities, other.opacities);
  copy(colors, other.colors);
}

GaussianSet GaussianSet::subset(std::span<const std::size_t> indices) const {
  GaussianSet out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.positions.push_back(positions[i]);
    out.scales.push_back(scales[i]);
    out.rotations.push_back(rotations[i]);
    out.opacities.push_back(opacities[i]);
    out.colors.push_back(colors[i]);
  }
  return out;
}

GaussianSet GaussianSet::slice(std::size_t offset, std::size_t count) const {
  GaussianSet out;
  out.append(*this, offset, count);
  return out;
}

std::size_t first_invalid_row(const GaussianSet& gs) noexcept {
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (!is_valid(gs.get(i))) return i;
  }
  return gs.size();
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q_wxyz) {
  const Eigen::Vector4d q = q_wxyz.normalized();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace v3dg
