#include "posefuse/bp.hpp"
#include "posefuse/crf.hpp"
#include "posefuse/factor_graph.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace posefuse;

namespace {

std::vector<Point3> scattered(std::mt19937_64& g, const Point3& centre, std::size_t n) {
  std::normal_distribution<double> d(0.0, 15.0);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(centre + Point3(d(g), d(g), d(g)));
  return out;
}

// All three outgoing messages of one ternary temporal factor, K states each.
void BM_TemporalMessages(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 g(1);
  const auto prev = scattered(g, Point3(0, 0, 1000), k);
  const auto centre = scattered(g, Point3(30, 0, 1000), k);
  const auto next = scattered(g, Point3(60, 0, 1000), k);
  const TemporalKernelFactor f(0, 1, 2, prev, centre, next, 0.5, 20.0, TemporalKernel::gaussian,
                               kHeatmapFloor);
  std::vector<double> in(k, 1.0 / static_cast<double>(k));
  std::vector<std::vector<double>> out(3, std::vector<double>(k));
  const std::vector<std::span<const double>> incoming{in, in, in};
  const std::vector<std::span<double>> outgoing{out[0], out[1], out[2]};
  f.normalizer();
  for (auto _ : state) {
    f.messages(incoming, outgoing);
    benchmark::DoNotOptimize(out[0].data());
  }
  state.SetComplexityN(static_cast<std::int64_t>(k));
}
BENCHMARK(BM_TemporalMessages)->RangeMultiplier(2)->Range(8, 64)->Complexity();

// Five BP iterations over one person: 14 joints, T frames, 64 states.
void BM_PersonInference(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<JointStateSet> sets;
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < joint::count; ++j) {
      JointStateSet s;
      s.joint_index = j;
      s.frame_index = t;
      s.states = scattered(g, Point3(30.0 * t, 120.0 * j, 1000), 64);
      for (int i = 0; i < 64; ++i) s.data_values.push_back(u(g));
      sets.push_back(std::move(s));
    }
  }
  const PersonCrf crf = build_graph(0, std::move(sets), default_body_model(), CRFParams{});
  for (auto _ : state) {
    const auto r = bp::run(crf.graph);
    benchmark::DoNotOptimize(r.beliefs.data());
  }
}
BENCHMARK(BM_PersonInference)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
