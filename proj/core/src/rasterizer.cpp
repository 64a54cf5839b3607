// SPDX-License-Identifier: Apache-2.0
#include "v3dg/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include <tbb/blocked_range.h>
#include <tbb/enumerable_thread_specific.h>
#include <tbb/parallel_for.h>

#include "projection.hpp"

namespace v3dg {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer folded into a running hash.
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Returns false when the splat is culled (near plane, degenerate
// covariance, or no overlap with the image).
bool make_splat(const GaussianSet& gs, std::size_t i, const Camera& cam, const RasterConfig& cfg,
                int tiles_x, int tiles_y, ProjectedSplat& out) {
  detail::ProjectionTerms pt;
  if (!detail::project_terms(gs.positions[i], gs.scales[i], gs.rotations[i], cam, cfg, pt)) {
    return false;
  }
  const double a = pt.cov(0, 0), b = pt.cov(0, 1), c = pt.cov(1, 1);
  const double det = a * c - b * b;
  if (!(det > cfg.min_cov_det)) return false;

  const double mid = 0.5 * (a + c);
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = std::ceil(cfg.extent_sigmas * std::sqrt(lambda_max));
  const double ts = cfg.tile_size;
  const double fx0 = std::floor((pt.mean.x() - radius) / ts);
  const double fx1 = std::floor((pt.mean.x() + radius) / ts);
  const double fy0 = std::floor((pt.mean.y() - radius) / ts);
  const double fy1 = std::floor((pt.mean.y() + radius) / ts);
  if (!(fx1 >= 0 && fy1 >= 0 && fx0 <= tiles_x - 1 && fy0 <= tiles_y - 1)) return false;

  out.index = static_cast<std::uint32_t>(i);
  out.depth = pt.cam_mean.z();
  out.mean = pt.mean;
  out.conic = Eigen::Vector3d(c, -b, a) / det;
  out.color = gs.colors[i].cast<double>();
  out.opacity = gs.opacities[i];
  // Small margin so rounding never skips a splat the exact test would keep.
  out.max_power = out.opacity >= cfg.min_alpha ? 2.0 * std::log(out.opacity / cfg.min_alpha) + 1e-6 : -1.0;
  out.tile_x0 = static_cast<int>(std::max(0.0, fx0));
  out.tile_y0 = static_cast<int>(std::max(0.0, fy0));
  out.tile_x1 = static_cast<int>(std::min<double>(tiles_x - 1, fx1));
  out.tile_y1 = static_cast<int>(std::min<double>(tiles_y - 1, fy1));
  return true;
}

}  // namespace

std::optional<Splat2D> project(const Gaussian3D& g, const Camera& cam, const RasterConfig& cfg) {
  detail::ProjectionTerms pt;
  if (!detail::project_terms(g.position, g.scale, g.rotation, cam, cfg, pt)) return std::nullopt;
  if (!(pt.cov.determinant() > cfg.min_cov_det)) return std::nullopt;
  Splat2D s;
  s.mean = pt.mean;
  s.cov = pt.cov;
  s.depth = pt.cam_mean.z();
  s.color = g.color.cast<double>();
  s.opacity = g.opacity;
  return s;
}

RasterPlan::RasterPlan(const GaussianSet& gs, const Camera& cam, const RasterConfig& cfg)
    : cam_(cam), cfg_(cfg) {
  tiles_x_ = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
  tiles_y_ = (cam.height + cfg.tile_size - 1) / cfg.tile_size;

  const std::size_t n = gs.size();
  std::vector<ProjectedSplat> all(n);
  std::vector<char> keep(n, 0);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 4096),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t i = r.begin(); i != r.end(); ++i) {
                        keep[i] = make_splat(gs, i, cam, cfg, tiles_x_, tiles_y_, all[i]) ? 1 : 0;
                      }
                    });

  std::vector<std::pair<double, std::uint32_t>> keys;
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) keys.emplace_back(all[i].depth, static_cast<std::uint32_t>(i));
  }
  std::sort(keys.begin(), keys.end());
  splats_.reserve(keys.size());
  for (const auto& [depth, i] : keys) splats_.push_back(all[i]);
  all.clear();
  all.shrink_to_fit();

  // Counting sort into tiles; walking splats in depth order keeps every
  // tile list depth-ordered.
  const std::size_t tiles = tile_count();
  tile_begin_.assign(tiles + 1, 0);
  for (const ProjectedSplat& s : splats_) {
    for (int ty = s.tile_y0; ty <= s.tile_y1; ++ty) {
      for (int tx = s.tile_x0; tx <= s.tile_x1; ++tx) {
        ++tile_begin_[static_cast<std::size_t>(ty) * tiles_x_ + tx + 1];
      }
    }
  }
  for (std::size_t t = 0; t < tiles; ++t) tile_begin_[t + 1] += tile_begin_[t];
  entries_.resize(tile_begin_[tiles]);
  std::vector<std::size_t> cursor(tile_begin_.begin(), tile_begin_.end() - 1);
  for (std::size_t k = 0; k < splats_.size(); ++k) {
    const ProjectedSplat& s = splats_[k];
    for (int ty = s.tile_y0; ty <= s.tile_y1; ++ty) {
      for (int tx = s.tile_x0; tx <= s.tile_x1; ++tx) {
        entries_[cursor[static_cast<std::size_t>(ty) * tiles_x_ + tx]++] =
            static_cast<std::uint32_t>(k);
      }
    }
  }
}

double RasterPlan::alpha_at(const ProjectedSplat& s, double px, double py, double* falloff) const {
  const double dx = px - s.mean.x();
  const double dy = py - s.mean.y();
  const double power = -0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
  const double g = std::exp(power);
  if (falloff) *falloff = g;
  return std::min(cfg_.max_alpha, s.opacity * g);
}

double RasterPlan::alpha_or_skip(const ProjectedSplat& s, double px, double py, double* falloff) const {
  const double dx = px - s.mean.x();
  const double dy = py - s.mean.y();
  const double q = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
  if (q > s.max_power) return 0.0;
  const double g = std::exp(-0.5 * q);
  if (falloff) *falloff = g;
  return std::min(cfg_.max_alpha, s.opacity * g);
}

ImageRGBA RasterPlan::composite(RenderStats* stats) const {
  ImageRGBA img(cam_.width, cam_.height);
  const std::size_t tiles = tile_count();
  const bool want_stats = stats != nullptr;
  std::vector<std::size_t> tile_contribs(want_stats ? tiles : 0, 0);
  std::vector<std::uint64_t> tile_hash(want_stats ? tiles : 0, 0);

  // Hot fields of a tile's splats packed contiguously.
  struct Packed {
    double mx, my, a, b, c, max_power, opacity;
  };
  tbb::enumerable_thread_specific<std::vector<Packed>> scratch;

  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, tiles), [&](const tbb::blocked_range<std::size_t>& r) {
    auto& packed = scratch.local();
    for (std::size_t t = r.begin(); t != r.end(); ++t) {
      const int tx = static_cast<int>(t % tiles_x_);
      const int ty = static_cast<int>(t / tiles_x_);
      const auto list = tile_list(t);
      const int x_end = std::min(cam_.width, (tx + 1) * cfg_.tile_size);
      const int y_end = std::min(cam_.height, (ty + 1) * cfg_.tile_size);
      packed.resize(list.size());
      for (std::size_t k = 0; k < list.size(); ++k) {
        const ProjectedSplat& s = splats_[list[k]];
        packed[k] = {s.mean.x(), s.mean.y(), s.conic[0], s.conic[1], s.conic[2], s.max_power, s.opacity};
      }
      std::size_t contribs = 0;
      std::uint64_t hash = 0;
      for (int y = ty * cfg_.tile_size; y < y_end; ++y) {
        for (int x = tx * cfg_.tile_size; x < x_end; ++x) {
          const double px = x + 0.5;
          const double py = y + 0.5;
          double transmittance = 1.0;
          double rgb[3] = {0.0, 0.0, 0.0};
          std::size_t k = 0;
          for (; k < list.size(); ++k) {
            const Packed& p = packed[k];
            const double dx = px - p.mx;
            const double dy = py - p.my;
            const double q = p.a * dx * dx + 2.0 * p.b * dx * dy + p.c * dy * dy;
            if (q > p.max_power) continue;
            const double alpha = std::min(cfg_.max_alpha, p.opacity * std::exp(-0.5 * q));
            if (alpha < cfg_.min_alpha) continue;
            const double next_t = transmittance * (1.0 - alpha);
            if (next_t < cfg_.min_transmittance) break;
            const double w = alpha * transmittance;
            const ProjectedSplat& s = splats_[list[k]];
            for (int c = 0; c < 3; ++c) rgb[c] += w * s.color[c];
            transmittance = next_t;
            if (want_stats) {
              ++contribs;
              hash = mix(hash, (static_cast<std::uint64_t>(y) * cam_.width + x) << 32 | s.index);
            }
          }
          if (want_stats) hash = mix(hash, k);
          double* out = img.pixel(x, y);
          out[0] = rgb[0];
          out[1] = rgb[1];
          out[2] = rgb[2];
          out[3] = 1.0 - transmittance;
        }
      }
      if (want_stats) {
        tile_contribs[t] = contribs;
        tile_hash[t] = hash;
      }
    }
  });

  if (want_stats) {
    RenderStats s;
    s.projected = splats_.size();
    s.tile_entries = entries_.size();
    std::uint64_t h = 0;
    for (const ProjectedSplat& p : splats_) {
      h = mix(h, p.index);
      h = mix(h, static_cast<std::uint64_t>(p.tile_x0) << 48 | static_cast<std::uint64_t>(p.tile_y0) << 32 |
                     static_cast<std::uint64_t>(p.tile_x1) << 16 | static_cast<std::uint64_t>(p.tile_y1));
    }
    for (std::size_t t = 0; t < tiles; ++t) {
      s.contributions += tile_contribs[t];
      h = mix(h, tile_hash[t]);
    }
    s.signature = h;
    *stats = s;
  }
  return img;
}

ImageRGBA render(const GaussianSet& gs, const Camera& cam, const RasterConfig& cfg, RenderStats* stats) {
  return RasterPlan(gs, cam, cfg).composite(stats);
}

}  // namespace v3dg
