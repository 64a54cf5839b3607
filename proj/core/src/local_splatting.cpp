// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include "v3dg/diff_splat.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

namespace {

double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Eigen::Vector3d pseudo_view_direction(std::uint64_t seed, std::size_t i) {
  // Independent stream per view so view i does not depend on how many
  // views were requested.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  std::mt19937_64 rng(seq);
  const double z = 2.0 * unit_double(rng()) - 1.0;
  const double phi = 2.0 * std::numbers::pi * unit_double(rng());
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

std::vector<Camera> sample_pseudo_views(const BoundingSphere& sphere, std::size_t count,
                                        std::uint64_t seed, const PseudoViewConfig& cfg) {
  if (!(sphere.radius > 0.0) || !std::isfinite(sphere.radius)) {
    raise(ErrorKind::kArgument, "pseudo-views need a sphere with positive finite radius");
  }
  std::vector<Camera> views;
  views.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::Vector3d dir = pseudo_view_direction(seed, i);
    const Eigen::Vector3d eye = sphere.center + cfg.distance_factor * sphere.radius * dir;
    const Eigen::Vector3d up = std::abs(dir.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
    views.push_back(look_at(eye, sphere.center, up, cfg.resolution, cfg.resolution, cfg.focal, cfg.focal));
  }
  return views;
}

double l1_alpha_loss(const ImageRGBA& render, const ImageRGBA& target, ImageRGBA* grad) {
  if (render.width() != target.width() || render.height() != target.height()) {
    raise(ErrorKind::kArgument, "loss: image dimensions differ");
  }
  const std::size_t n = render.size();
  if (n == 0) return 0.0;
  if (grad) *grad = ImageRGBA(render.width(), render.height());

  const double w_rgb = 1.0 / (3.0 * static_cast<double>(n));
  const double w_alpha = kAlphaLossWeight / static_cast<double>(n);
  double rgb_sum = 0.0;
  double alpha_sum = 0.0;
  const auto& r = render.data();
  const auto& t = target.data();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 4; ++c) {
      const double d = r[4 * p + c] - t[4 * p + c];
      (c < 3 ? rgb_sum : alpha_sum) += std::abs(d);
      if (grad) {
        const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        grad->data()[4 * p + c] = sign * (c < 3 ? w_rgb : w_alpha);
      }
    }
  }
  return rgb_sum * w_rgb + alpha_sum * w_alpha;
}

constexpr int OptimizerState::kWidths[OptimizerState::kGroups];

OptimizerState::OptimizerState(std::size_t n, AdamConfig cfg) : n_(n), cfg_(cfg) {
  for (int g = 0; g < kGroups; ++g) {
    m_[g].assign(n * static_cast<std::size_t>(kWidths[g]), 0.0);
    v_[g].assign(n * static_cast<std::size_t>(kWidths[g]), 0.0);
  }
}

void OptimizerState::apply(std::vector<double>* params[kGroups], const std::vector<double>* grads[kGroups]) {
  ++step_;
  const double lrs[kGroups] = {cfg_.lr_position, cfg_.lr_scale, cfg_.lr_rotation, cfg_.lr_opacity,
                               cfg_.lr_color};
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (int g = 0; g < kGroups; ++g) {
    auto& p = *params[g];
    const auto& grad = *grads[g];
    auto& m = m_[g];
    auto& v = v_[g];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * grad[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      p[k] -= lrs[g] * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

namespace {

// Unconstrained parameterization the optimizer steps on.
struct RawParams {
  std::vector<double> position, log_scale, rotation, logit_opacity, color;

  explicit RawParams(const GaussianSet& gs) {
    const std::size_t n = gs.size();
    position.resize(3 * n);
    log_scale.resize(3 * n);
    rotation.resize(4 * n);
    logit_opacity.resize(n);
    color.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        position[3 * i + c] = gs.positions[i][c];
        log_scale[3 * i + c] = std::log(static_cast<double>(gs.scales[i][c]));
        color[3 * i + c] = gs.colors[i][c];
      }
      for (int c = 0; c < 4; ++c) rotation[4 * i + c] = gs.rotations[i][c];
      logit_opacity[i] = logit(gs.opacities[i]);
    }
  }

  void materialize(GaussianSet& gs) const {
    for (std::size_t i = 0; i < gs.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        gs.positions[i][c] = static_cast<float>(position[3 * i + c]);
        gs.scales[i][c] = static_cast<float>(std::exp(log_scale[3 * i + c]));
        gs.colors[i][c] = static_cast<float>(color[3 * i + c]);
      }
      for (int c = 0; c < 4; ++c) gs.rotations[i][c] = static_cast<float>(rotation[4 * i + c]);
      gs.opacities[i] = static_cast<float>(sigmoid(logit_opacity[i]));
    }
  }

  bool all_finite() const {
    for (const auto* v : {&position, &log_scale, &rotation, &logit_opacity, &color}) {
      for (double x : *v) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }
};

}  // namespace

GaussianSet optimize_group(const GaussianSet& original, const GaussianSet& init, std::uint32_t iterations,
                           std::uint64_t seed, const BoundingSphere& sphere, const LocalSplatOptions& opts,
                           OptimizeReport* report) {
  OptimizeReport local_report;
  OptimizeReport& rep = report ? *report : local_report;
  rep = OptimizeReport{};
  if (iterations == 0 || init.empty()) return init;

  const std::size_t n = init.size();
  const auto views = sample_pseudo_views(sphere, iterations, seed, opts.views);

  RawParams raw(init);
  GaussianSet current = init;
  GaussianSet last_good = init;
  OptimizerState adam(n, opts.adam);

  std::vector<double> g_pos(3 * n), g_scale(3 * n), g_rot(4 * n), g_opa(n), g_col(3 * n);
  std::vector<double>* params[] = {&raw.position, &raw.log_scale, &raw.rotation, &raw.logit_opacity, &raw.color};
  const std::vector<double>* grads[] = {&g_pos, &g_scale, &g_rot, &g_opa, &g_col};

  const double min_logit = logit(opts.min_opacity);
  const double max_logit = logit(opts.max_opacity);
  const double min_log_scale = std::log(opts.min_scale);

  for (std::uint32_t it = 0; it < iterations; ++it) {
    const Camera& view = views[it];
    const ImageRGBA target = render(original, view, opts.raster);
    const RasterPlan plan(current, view, opts.raster);
    const ImageRGBA image = plan.composite();
    ImageRGBA loss_grad;
    const double loss = opts.loss(image, target, &loss_grad);
    if (!std::isfinite(loss)) {
      rep.aborted = true;
      rep.diagnostic = "non-finite loss at iteration " + std::to_string(it);
      return last_good;
    }
    if (it == 0) rep.first_loss = loss;
    rep.last_loss = loss;
    last_good = current;

    const GaussianGrads g = render_backward(plan, current, loss_grad);
    for (std::size_t i = 0; i < n; ++i) {
      const double o = current.opacities[i];
      g_opa[i] = g.opacities[i] * o * (1.0 - o);
      for (int c = 0; c < 3; ++c) {
        g_pos[3 * i + c] = g.positions[i][c];
        g_scale[3 * i + c] = g.scales[i][c] * current.scales[i][c];
        g_col[3 * i + c] = g.colors[i][c];
      }
      for (int c = 0; c < 4; ++c) g_rot[4 * i + c] = g.rotations[i][c];
    }
    adam.apply(params, grads);

    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Map<Eigen::Vector4d> q(raw.rotation.data() + 4 * i);
      const double norm = q.norm();
      if (norm > 0.0) q /= norm;
      raw.logit_opacity[i] = std::clamp(raw.logit_opacity[i], min_logit, max_logit);
      for (int c = 0; c < 3; ++c) {
        raw.log_scale[3 * i + c] = std::max(raw.log_scale[3 * i + c], min_log_scale);
        raw.color[3 * i + c] = std::max(raw.color[3 * i + c], 0.0);
      }
    }
    if (!raw.all_finite()) {
      rep.aborted = true;
      rep.diagnostic = "non-finite parameters after iteration " + std::to_string(it);
      return last_good;
    }
    raw.materialize(current);
    rep.iterations_run = it + 1;
  }
  return current;
}

}  // namespace v3dg
