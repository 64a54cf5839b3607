// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "v3dg/camera.hpp"
#include "v3dg/gaussian.hpp"
#include "v3dg/image.hpp"

namespace v3dg {

/// Rasterization constants. Defaults follow the common 3DGS tile
/// rasterizer; no 2D dilation is ever added to projected covariances.
struct RasterConfig {
  int tile_size = 16;
  double near_plane = 0.01;
  double extent_sigmas = 3.0;
  double max_alpha = 0.99;
  double min_alpha = 1.0 / 255.0;
  double min_transmittance = 1e-4;
  double min_cov_det = 1e-12;
};

/// Screen-space footprint of one Gaussian.
struct Splat2D {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  double depth = 0.0;
  Eigen::Vector3d color;
  double opacity = 0.0;
};

/// EWA projection: cov2d = J W Σ Wᵀ Jᵀ. Empty when the mean is at or
/// behind the near plane or the covariance is degenerate.
std::optional<Splat2D> project(const Gaussian3D& g, const Camera& cam, const RasterConfig& cfg = {});

/// Per-splat data the compositor and the backward pass need.
struct ProjectedSplat {
  std::uint32_t index = 0;  // row in the source GaussianSet
  double depth = 0.0;
  Eigen::Vector2d mean;
  Eigen::Vector3d conic;    // inverse covariance (a, b, c): q = a dx² + 2b dx dy + c dy²
  Eigen::Vector3d color;
  double opacity = 0.0;
  /// q beyond which opacity * exp(-q/2) falls below the skip threshold.
  double max_power = 0.0;
  int tile_x0 = 0, tile_y0 = 0, tile_x1 = -1, tile_y1 = -1;  // inclusive
};

/// Optional diagnostics of a composite pass.
struct RenderStats {
  std::size_t projected = 0;       // splats surviving projection and binning
  std::size_t tile_entries = 0;    // (tile, splat) pairs
  std::size_t contributions = 0;   // (pixel, splat) pairs blended
  /// Hash over every blended (pixel, splat) pair, each pixel's termination
  /// point and each splat's tile rectangle. Two renders with equal hashes
  /// took the same discrete branches.
  std::uint64_t signature = 0;
};

/// Projection, depth sort and tile binning for one (set, camera) pair.
/// Shared by the forward compositor and the analytic backward pass.
class RasterPlan {
 public:
  RasterPlan(const GaussianSet& gs, const Camera& cam, const RasterConfig& cfg = {});

  ImageRGBA composite(RenderStats* stats = nullptr) const;

  const Camera& camera() const noexcept { return cam_; }
  const RasterConfig& config() const noexcept { return cfg_; }
  int tiles_x() const noexcept { return tiles_x_; }
  int tiles_y() const noexcept { return tiles_y_; }
  std::size_t tile_count() const noexcept { return static_cast<std::size_t>(tiles_x_) * tiles_y_; }
  /// Splats sorted by ascending (depth, source index).
  const std::vector<ProjectedSplat>& splats() const noexcept { return splats_; }
  /// Depth-ordered positions into splats() for tile t.
  std::span<const std::uint32_t> tile_list(std::size_t t) const {
    return {entries_.data() + tile_begin_[t], entries_.data() + tile_begin_[t + 1]};
  }

  /// Evaluates the contribution of `s` at the pixel center (px, py) as the
  /// compositor does. Returns the Gaussian falloff through `falloff`.
  double alpha_at(const ProjectedSplat& s, double px, double py, double* falloff = nullptr) const;
  /// Same as alpha_at but returns 0 without evaluating the exponential
  /// when the splat cannot pass the skip threshold at this pixel.
  double alpha_or_skip(const ProjectedSplat& s, double px, double py, double* falloff = nullptr) const;

 private:
  Camera cam_;
  RasterConfig cfg_;
  int tiles_x_ = 0;
  int tiles_y_ = 0;
  std::vector<ProjectedSplat> splats_;
  std::vector<std::size_t> tile_begin_;
  std::vector<std::uint32_t> entries_;
};

/// Forward render onto a transparent black background.
ImageRGBA render(const GaussianSet& gs, const Camera& cam, const RasterConfig& cfg = {},
                 RenderStats* stats = nullptr);

}  // namespace v3dg
