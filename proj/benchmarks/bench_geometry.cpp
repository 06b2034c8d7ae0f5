#include "posefuse/geometry.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace posefuse;

namespace {

std::vector<Ray> random_rays(std::mt19937_64& g, int n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<Ray> rays;
  for (int i = 0; i < n; ++i) {
    const Point3 origin(3000 * d(g), 3000 * d(g), 2000);
    rays.push_back(Ray{origin, (Point3(0, 0, 1000) - origin).normalized()});
  }
  return rays;
}

void BM_Triangulate(benchmark::State& state) {
  std::mt19937_64 g(3);
  const auto rays = random_rays(g, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(triangulate(rays));
}
BENCHMARK(BM_Triangulate)->Arg(2)->Arg(3)->Arg(8);

void BM_ProjectBackproject(benchmark::State& state) {
  const CameraCalibration cam =
      look_at_camera("c", Point3(5000, 0, 2000), Point3(0, 0, 1000), 1000, 1280, 720);
  const Point3 p(120, -40, 900);
  for (auto _ : state) {
    const Projection pr = cam.project(p);
    benchmark::DoNotOptimize(cam.backproject(pr.pixel));
  }
}
BENCHMARK(BM_ProjectBackproject);

}  // namespace

BENCHMARK_MAIN();
