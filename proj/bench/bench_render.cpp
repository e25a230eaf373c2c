#include "gavatar/pipeline.hpp"
#include "gavatar/render.hpp"
#include "gavatar/rng.hpp"
#include "gavatar/trainer.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace gavatar;

namespace {

std::vector<Splat2D<float>> splats(int n, int size) {
  Rng rng(1);
  const Camera cam = Camera::look_at(Vec3d(0, 0, 3), Vec3d::Zero(), Vec3d::UnitY(), 40, size, size);
  std::vector<Splat2D<float>> out;
  while (static_cast<int>(out.size()) < n) {
    Mat3d a;
    for (int k = 0; k < 9; ++k) a.data()[k] = rng.normal() * 0.04;
    const Vec3d x(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
    auto sp = project_gaussian<float>(x.cast<float>(), (a * a.transpose()).cast<float>(), cam, RasterSettings{});
    if (!sp) continue;
    sp->color = Vec3<float>(rng.uniform(), rng.uniform(), rng.uniform());
    sp->alpha0 = float(rng.uniform(0.05, 0.99));
    out.push_back(*sp);
  }
  return out;
}

RenderTarget target(int size) {
  RenderTarget t;
  t.width = t.height = size;
  return t;
}

void BM_RasterTiled(benchmark::State& st) {
  const auto s = splats(int(st.range(0)), int(st.range(1)));
  const auto t = target(int(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(rasterize<float>(s, t, RasterSettings{}));
}

void BM_RasterReference(benchmark::State& st) {
  const auto s = splats(int(st.range(0)), int(st.range(1)));
  const auto t = target(int(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(rasterize_reference<float>(s, t, RasterSettings{}));
}

BENCHMARK(BM_RasterTiled)->Args({500, 64})->Args({5000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RasterReference)->Args({500, 64})->Args({5000, 128})->Unit(benchmark::kMillisecond);

struct AvatarBench {
  SyntheticScene scene;
  Dataset data;
  AvatarModel<float> model;

  AvatarBench() {
    SynthConfig sc;
    sc.poses = 2;
    sc.train_cameras = 1;
    scene = make_synthetic_scene(sc);
    data = make_dataset(scene, RenderSettings{});
    ModelSpec spec;
    spec.field = bundled_field_config();
    spec.prior_resolution = 128;
    model = build_model(scene.mesh, scene.rig, spec).cast<float>();
  }
};

AvatarBench& avatar() {
  static AvatarBench b;
  return b;
}

void BM_AvatarForward(benchmark::State& st) {
  auto& b = avatar();
  for (auto _ : st) benchmark::DoNotOptimize(render_avatar(b.model, b.data.train[0].frame, RenderSettings{}));
}

void BM_AvatarLossAndGradient(benchmark::State& st) {
  auto& b = avatar();
  GradientSet<float> g;
  for (auto _ : st)
    benchmark::DoNotOptimize(loss_and_gradient(b.model, b.data.train[0].frame, b.data.train[0].target,
                                               RenderSettings{}, LossConfig{}, &g));
}

BENCHMARK(BM_AvatarForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AvatarLossAndGradient)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
