// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "v3dg/bench.hpp"
#include "v3dg/diff_splat.hpp"
#include "v3dg/lod_build.hpp"
#include "v3dg/lod_select.hpp"

using namespace v3dg;

namespace {

Camera view(int w, int h) {
  const double f = focal_from_fov_x(0.785, w);
  return look_at({0, -3.5, 1.2}, {0, 0, 0}, {0, 0, 1}, w, h, f, f);
}

const std::shared_ptr<const Bundle>& bundle16k() {
  static const auto b = [] {
    BuildParams p;
    p.gaussians_per_cluster = 1024;
    p.simplify_iterations = 0;
    return std::make_shared<const Bundle>(build_bundle(synth_shell_asset(16384, 1), p));
  }();
  return b;
}

}  // namespace

static void BM_Render(benchmark::State& state) {
  const GaussianSet gs = synth_shell_asset(static_cast<std::size_t>(state.range(0)), 1);
  const Camera cam = view(480, 270);
  for (auto _ : state) benchmark::DoNotOptimize(render(gs, cam));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Render)->Arg(4096)->Arg(65536)->Unit(benchmark::kMillisecond);

static void BM_Backward(benchmark::State& state) {
  const GaussianSet gs = synth_shell_asset(4096, 2);
  const Camera cam = sample_pseudo_views({{0, 0, 0}, 1.0}, 1, 3)[0];
  const RasterPlan plan(gs, cam);
  ImageRGBA grad(cam.width, cam.height);
  for (double& v : grad.data()) v = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(plan, gs, grad));
}
BENCHMARK(BM_Backward)->Unit(benchmark::kMillisecond);

static void BM_LocalSplatIteration(benchmark::State& state) {
  const GaussianSet original = synth_shell_asset(8192, 4);
  const GaussianSet init = downsample_half(original);
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimize_group(original, init, 1, 5, {{0, 0, 0}, 1.02}));
  }
}
BENCHMARK(BM_LocalSplatIteration)->Unit(benchmark::kMillisecond);

static void BM_Footprint(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<BoundingSphere> spheres(1024);
  for (auto& s : spheres) s = {{u(rng), u(rng), u(rng) + 20}, 0.5};
  const Camera cam = view(1920, 1080);
  for (auto _ : state) {
    double sum = 0.0;
    for (const auto& s : spheres) sum += footprint(s, cam);
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_Footprint);

static void BM_SelectScene(benchmark::State& state) {
  const LoadedScene scene = make_loaded_scene({{"a", bundle16k()}}, grid_instances("a", 10, 10, 3.0, 0.8, 1.2, 7));
  const double f = focal_from_fov_x(0.785, 1920);
  const Camera cam = look_at({0, -40, 20}, {0, 0, 0}, {0, 0, 1}, 1920, 1080, f, f);
  for (auto _ : state) benchmark::DoNotOptimize(select_scene(scene, cam, 2048));
}
BENCHMARK(BM_SelectScene)->Unit(benchmark::kMicrosecond);

static void BM_Gather(benchmark::State& state) {
  const LoadedScene scene = make_loaded_scene({{"a", bundle16k()}}, grid_instances("a", 5, 5, 3.0, 0.8, 1.2, 7));
  const SelectionResult sel = select_finest(scene);
  for (auto _ : state) benchmark::DoNotOptimize(gather(scene, sel));
}
BENCHMARK(BM_Gather)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
