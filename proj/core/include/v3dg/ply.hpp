// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "v3dg/gaussian.hpp"

namespace v3dg {

/// Zeroth-order spherical-harmonic basis constant, 1 / (2 sqrt(pi)).
inline constexpr double kShC0 = 0.28209479177387814;

/// Reads a binary little-endian 3DGS point cloud (x, y, z, f_dc_0..2,
/// opacity, scale_0..2, rot_0..3; other properties are skipped) and applies
/// the activations: logistic opacity, exp scale, normalized rotation and
/// color = 0.5 + C0 * f_dc clamped at zero.
GaussianSet load_ply(const std::filesystem::path& path);

/// Writes the inverse-activated raw values in the same layout, with zero
/// normals, so that load_ply(write_ply(gs)) reproduces gs.
void write_ply(const GaussianSet& gs, const std::filesystem::path& path);

}  // namespace v3dg
