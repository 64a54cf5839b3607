// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "v3dg/camera.hpp"
#include "v3dg/gaussian.hpp"
#include "v3dg/image.hpp"
#include "v3dg/rasterizer.hpp"

namespace v3dg {

/// Gradients of a scalar loss with respect to each Gaussian's stored
/// attributes: position, scale (the activated standard deviations),
/// rotation (the stored wxyz quaternion, through its normalization),
/// opacity and color.
struct GaussianGrads {
  explicit GaussianGrads(std::size_t n = 0)
      : positions(n, Eigen::Vector3d::Zero()),
        scales(n, Eigen::Vector3d::Zero()),
        rotations(n, Eigen::Vector4d::Zero()),
        opacities(n, 0.0),
        colors(n, Eigen::Vector3d::Zero()) {}

  std::size_t size() const noexcept { return positions.size(); }
  bool all_finite() const noexcept;
  bool all_zero() const noexcept;

  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> scales;
  std::vector<Eigen::Vector4d> rotations;
  std::vector<double> opacities;
  std::vector<Eigen::Vector3d> colors;
};

struct PseudoViewConfig {
  int resolution = 64;
  /// A sphere at 4 radii then spans about 0.9 of the frame.
  double focal = 115.2;
  double distance_factor = 4.0;
};

/// `count` cameras on a sphere of radius distance_factor * r around the
/// sphere center, directions uniform on S², each looking at the center.
/// Reproducible for a given seed.
std::vector<Camera> sample_pseudo_views(const BoundingSphere& sphere, std::size_t count,
                                        std::uint64_t seed, const PseudoViewConfig& cfg = {});

/// Unit direction i of the seeded uniform-sphere sequence used above.
Eigen::Vector3d pseudo_view_direction(std::uint64_t seed, std::size_t i);

/// Scalar image loss. When `grad` is non-null it receives dL/d(pixel
/// channel) with the same layout as the render.
using LossFunction = std::function<double(const ImageRGBA& render, const ImageRGBA& target, ImageRGBA* grad)>;

inline constexpr double kAlphaLossWeight = 0.1;

/// Mean L1 over RGB plus 0.1 times mean L1 over alpha.
double l1_alpha_loss(const ImageRGBA& render, const ImageRGBA& target, ImageRGBA* grad = nullptr);

/// Analytic gradients of a loss whose per-pixel gradient image is
/// `loss_grad`, through alpha blending, the 2D Gaussian falloff and the
/// EWA projection. `plan` must be the plan that produced the forward render
/// of `gs`.
GaussianGrads render_backward(const RasterPlan& plan, const GaussianSet& gs, const ImageRGBA& loss_grad);
GaussianGrads render_backward(const GaussianSet& gs, const Camera& cam, const ImageRGBA& loss_grad,
                              const RasterConfig& cfg = {});

/// Adam hyper-parameters, one learning rate per attribute group. Rates
/// apply to the unconstrained parameters: position, log-scale, quaternion,
/// logit-opacity and color.
struct AdamConfig {
  double lr_position = 1.6e-5;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
};

/// Adam moments for every parameter group of a fixed-size set.
class OptimizerState {
 public:
  static constexpr int kGroups = 5;
  static constexpr int kWidths[kGroups] = {3, 3, 4, 1, 3};

  explicit OptimizerState(std::size_t n, AdamConfig cfg = {});

  std::size_t size() const noexcept { return n_; }
  std::uint64_t step() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return cfg_; }

  /// One Adam update. `params[g]` and `grads[g]` hold n * kWidths[g]
  /// values for group g.
  void apply(std::vector<double>* params[kGroups], const std::vector<double>* grads[kGroups]);

 private:
  std::size_t n_;
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<double> m_[kGroups];
  std::vector<double> v_[kGroups];
};

struct LocalSplatOptions {
  PseudoViewConfig views;
  AdamConfig adam;
  RasterConfig raster;
  LossFunction loss = l1_alpha_loss;
  double min_opacity = 1e-4;
  double max_opacity = 1.0 - 1e-4;
  double min_scale = 1e-7;
};

struct OptimizeReport {
  std::uint32_t iterations_run = 0;
  bool aborted = false;
  std::string diagnostic;
  double first_loss = 0.0;
  double last_loss = 0.0;
};

/// Local splatting: fits `init` to renders of `original` from one fresh
/// pseudo-view per iteration around `sphere`. The Gaussian count never
/// changes. A non-finite loss stops the loop and returns the last finite
/// state.
GaussianSet optimize_group(const GaussianSet& original, const GaussianSet& init,
                           std::uint32_t iterations, std::uint64_t seed, const BoundingSphere& sphere,
                           const LocalSplatOptions& opts = {}, OptimizeReport* report = nullptr);

}  // namespace v3dg
