// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>

#include <tbb/blocked_range.h>
#include <tbb/enumerable_thread_specific.h>
#include <tbb/parallel_for.h>

#include "projection.hpp"
#include "v3dg/diff_splat.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

namespace {

// Screen-space gradient of one splat: mean (2), conic a/b/c (3),
// opacity (1), color (3).
using ScreenGrad = std::array<double, 9>;

struct Contribution {
  std::uint32_t slot;   // position within the tile list
  double alpha;
  double falloff;
  double transmittance; // before this splat
  bool clamped;
};

// dL/dq for q = R(q̂) with q̂ = q / |q|, given G = dL/dR.
Eigen::Vector4d rotation_grad(const Eigen::Vector4d& q_raw, const Eigen::Matrix3d& g) {
  const double norm = q_raw.norm();
  const Eigen::Vector4d q = q_raw / norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Vector4d d;
  d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
              w * g(2, 1) - 2 * x * g(2, 2));
  d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
              z * g(2, 1) - 2 * y * g(2, 2));
  d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
              y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  // Project out the radial component and undo the normalization.
  return (d - q * q.dot(d)) / norm;
}

}  // namespace

bool GaussianGrads::all_finite() const noexcept {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!positions[i].allFinite() || !scales[i].allFinite() || !rotations[i].allFinite() ||
        !std::isfinite(opacities[i]) || !colors[i].allFinite()) {
      return false;
    }
  }
  return true;
}

bool GaussianGrads::all_zero() const noexcept {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!positions[i].isZero(0) || !scales[i].isZero(0) || !rotations[i].isZero(0) ||
        opacities[i] != 0.0 || !colors[i].isZero(0)) {
      return false;
    }
  }
  return true;
}

GaussianGrads render_backward(const RasterPlan& plan, const GaussianSet& gs, const ImageRGBA& loss_grad) {
  const Camera& cam = plan.camera();
  const RasterConfig& cfg = plan.config();
  if (loss_grad.width() != cam.width || loss_grad.height() != cam.height) {
    raise(ErrorKind::kArgument, "render_backward: gradient image size does not match the camera");
  }

  const auto& splats = plan.splats();
  const std::size_t tiles = plan.tile_count();

  // Per-entry screen gradients, laid out like the tile lists so the
  // reduction below runs in a fixed order regardless of scheduling.
  std::vector<std::size_t> entry_base(tiles + 1, 0);
  for (std::size_t t = 0; t < tiles; ++t) entry_base[t + 1] = entry_base[t] + plan.tile_list(t).size();
  std::vector<ScreenGrad> entry_grads(entry_base[tiles], ScreenGrad{});

  tbb::enumerable_thread_specific<std::vector<Contribution>> scratch;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, tiles), [&](const tbb::blocked_range<std::size_t>& r) {
    auto& contribs = scratch.local();
    for (std::size_t t = r.begin(); t != r.end(); ++t) {
      const auto list = plan.tile_list(t);
      if (list.empty()) continue;
      ScreenGrad* grads = entry_grads.data() + entry_base[t];
      const int tx = static_cast<int>(t % plan.tiles_x());
      const int ty = static_cast<int>(t / plan.tiles_x());
      const int x_end = std::min(cam.width, (tx + 1) * cfg.tile_size);
      const int y_end = std::min(cam.height, (ty + 1) * cfg.tile_size);

      for (int y = ty * cfg.tile_size; y < y_end; ++y) {
        for (int x = tx * cfg.tile_size; x < x_end; ++x) {
          const double* g_pix = loss_grad.pixel(x, y);
          if (g_pix[0] == 0.0 && g_pix[1] == 0.0 && g_pix[2] == 0.0 && g_pix[3] == 0.0) continue;
          const double px = x + 0.5;
          const double py = y + 0.5;

          // Replay the forward walk, recording every blended splat.
          contribs.clear();
          double transmittance = 1.0;
          for (std::uint32_t k = 0; k < list.size(); ++k) {
            const ProjectedSplat& s = splats[list[k]];
            double falloff = 0.0;
            const double alpha = plan.alpha_or_skip(s, px, py, &falloff);
            if (alpha < cfg.min_alpha) continue;
            const double next_t = transmittance * (1.0 - alpha);
            if (next_t < cfg.min_transmittance) break;
            contribs.push_back({k, alpha, falloff, transmittance, s.opacity * falloff > cfg.max_alpha});
            transmittance = next_t;
          }

          // Back to front with suffix sums of the later contributions.
          double suffix_rgb[3] = {0.0, 0.0, 0.0};
          double suffix_a = 0.0;
          for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
            const ProjectedSplat& s = splats[list[it->slot]];
            ScreenGrad& sg = grads[it->slot];
            const double weight = it->transmittance * it->alpha;
            const double inv_one_minus = 1.0 / (1.0 - it->alpha);

            double d_alpha = g_pix[3] * (it->transmittance - suffix_a * inv_one_minus);
            for (int c = 0; c < 3; ++c) {
              d_alpha += g_pix[c] * (it->transmittance * s.color[c] - suffix_rgb[c] * inv_one_minus);
              sg[6 + c] += g_pix[c] * weight;
              suffix_rgb[c] += weight * s.color[c];
            }
            suffix_a += weight;

            if (it->clamped) continue;
            sg[5] += d_alpha * it->falloff;
            const double d_falloff = d_alpha * s.opacity;
            // falloff = exp(-q / 2)
            const double d_q = -0.5 * it->falloff * d_falloff;
            const double dx = px - s.mean.x();
            const double dy = py - s.mean.y();
            sg[0] += -d_q * 2.0 * (s.conic[0] * dx + s.conic[1] * dy);
            sg[1] += -d_q * 2.0 * (s.conic[1] * dx + s.conic[2] * dy);
            sg[2] += d_q * dx * dx;
            sg[3] += d_q * 2.0 * dx * dy;
            sg[4] += d_q * dy * dy;
          }
        }
      }
    }
  });

  // Fixed-order reduction into per-splat screen gradients.
  std::vector<ScreenGrad> splat_grads(splats.size(), ScreenGrad{});
  for (std::size_t t = 0; t < tiles; ++t) {
    const auto list = plan.tile_list(t);
    const ScreenGrad* grads = entry_grads.data() + entry_base[t];
    for (std::size_t k = 0; k < list.size(); ++k) {
      ScreenGrad& dst = splat_grads[list[k]];
      for (int j = 0; j < 9; ++j) dst[static_cast<std::size_t>(j)] += grads[k][static_cast<std::size_t>(j)];
    }
  }

  GaussianGrads out(gs.size());
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, splats.size(), 1024),
                    [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t k = r.begin(); k != r.end(); ++k) {
      const ProjectedSplat& s = splats[k];
      const ScreenGrad& sg = splat_grads[k];
      const std::size_t i = s.index;

      out.opacities[i] = sg[5];
      out.colors[i] = Eigen::Vector3d(sg[6], sg[7], sg[8]);

      detail::ProjectionTerms pt;
      detail::project_terms(gs.positions[i], gs.scales[i], gs.rotations[i], cam, cfg, pt);

      // Conic -> covariance: d cov = -Q (dL/dQ) Q with a symmetric dL/dQ.
      Eigen::Matrix2d d_conic;
      d_conic << sg[2], 0.5 * sg[3], 0.5 * sg[3], sg[4];
      const Eigen::Matrix2d conic_m = (Eigen::Matrix2d() << s.conic[0], s.conic[1], s.conic[1], s.conic[2]).finished();
      const Eigen::Matrix2d d_cov = -conic_m * d_conic * conic_m;

      // cov = M Σ Mᵀ with M = J W.
      const Eigen::Matrix3d d_sigma = pt.jw.transpose() * d_cov * pt.jw;
      const Eigen::Matrix<double, 2, 3> d_m = 2.0 * d_cov * pt.jw * pt.sigma;
      const Eigen::Matrix<double, 2, 3> d_j = d_m * cam.rotation.transpose();

      const double tx = pt.cam_mean.x(), ty = pt.cam_mean.y(), tz = pt.cam_mean.z();
      const double iz = 1.0 / tz, iz2 = iz * iz, iz3 = iz2 * iz;
      Eigen::Vector3d d_t;
      d_t.x() = sg[0] * cam.fx * iz + d_j(0, 2) * (-cam.fx * iz2);
      d_t.y() = sg[1] * cam.fy * iz + d_j(1, 2) * (-cam.fy * iz2);
      d_t.z() = -sg[0] * cam.fx * tx * iz2 - sg[1] * cam.fy * ty * iz2 +
                d_j(0, 0) * (-cam.fx * iz2) + d_j(0, 2) * (2.0 * cam.fx * tx * iz3) +
                d_j(1, 1) * (-cam.fy * iz2) + d_j(1, 2) * (2.0 * cam.fy * ty * iz3);
      out.positions[i] = cam.rotation.transpose() * d_t;

      // Σ = (R S)(R S)ᵀ.
      const Eigen::Matrix3d rs = pt.rot * pt.scale.asDiagonal();
      const Eigen::Matrix3d d_rs = 2.0 * d_sigma * rs;
      Eigen::Vector3d d_scale;
      Eigen::Matrix3d d_rot;
      for (int j = 0; j < 3; ++j) {
        d_scale[j] = pt.rot.col(j).dot(d_rs.col(j));
        d_rot.col(j) = d_rs.col(j) * pt.scale[j];
      }
      out.scales[i] = d_scale;
      out.rotations[i] = rotation_grad(gs.rotations[i].cast<double>(), d_rot);
    }
  });
  return out;
}

GaussianGrads render_backward(const GaussianSet& gs, const Camera& cam, const ImageRGBA& loss_grad,
                              const RasterConfig& cfg) {
  return render_backward(RasterPlan(gs, cam, cfg), gs, loss_grad);
}

}  // namespace v3dg
