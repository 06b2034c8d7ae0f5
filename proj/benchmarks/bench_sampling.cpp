#include "posefuse/random.hpp"
#include "posefuse/sampling.hpp"
#include "posefuse/synth.hpp"

#include <benchmark/benchmark.h>

using namespace posefuse;

namespace {

// Draws 64 hypotheses for one joint from three synthetic heat maps.
void BM_SampleStates(benchmark::State& state) {
  SceneSpec spec;
  spec.n_frames = 3;
  const SyntheticScene scene(spec, 1);
  const auto stacks = scene.heatmaps(1);
  std::vector<JointView> views;
  for (std::size_t c = 0; c < stacks.size(); ++c) {
    const Heatmap& h = stacks[c].channels[joint::l_wrist];
    views.push_back({&h, &scene.cameras()[c], h.full_rect()});
  }
  std::uint64_t i = 0;
  for (auto _ : state) {
    auto rng = SeededRandomSource::derive(7, {i++});
    benchmark::DoNotOptimize(sample_states(views, rng));
  }
}
BENCHMARK(BM_SampleStates)->Unit(benchmark::kMicrosecond);

void BM_BuildPmf(benchmark::State& state) {
  SceneSpec spec;
  spec.n_frames = 3;
  const SyntheticScene scene(spec, 1);
  const HeatmapStack stack = scene.render(1, 0);
  const Heatmap& h = stack.channels[joint::neck];
  for (auto _ : state) benchmark::DoNotOptimize(build_pmf(h, h.full_rect()));
}
BENCHMARK(BM_BuildPmf)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
