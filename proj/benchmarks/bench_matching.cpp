#include <benchmark/benchmark.h>

#include "adsm/cost_volume.hpp"
#include "adsm/disparity.hpp"
#include "adsm/evaluation.hpp"
#include "adsm/pipeline.hpp"
#include "adsm/sgm.hpp"

namespace {

struct Pair {
  adsm::ImagePlane left, right;
};

Pair make_pair(int size) {
  const adsm::Stereogram s = adsm::make_random_dot_stereogram(
      adsm::two_plane_field(size, size, 0, 12, size / 4, size / 4, size / 2, size / 2), 3);
  return {adsm::normalize(s.left), adsm::normalize(s.right)};
}

void BM_Census(benchmark::State& state) {
  const Pair p = make_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(adsm::build_dsi_census(p.left, p.right, 7, 32));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * 33);
}
BENCHMARK(BM_Census)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Sad(benchmark::State& state) {
  const Pair p = make_pair(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(adsm::build_dsi_sad(p.left, p.right, 5, 32));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * 33);
}
BENCHMARK(BM_Sad)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_AggregateAll(benchmark::State& state) {
  const Pair p = make_pair(static_cast<int>(state.range(0)));
  const adsm::CostVolume v = adsm::build_dsi_census(p.left, p.right, 7, 32);
  for (auto _ : state) benchmark::DoNotOptimize(adsm::aggregate_all(v, adsm::Penalties{}));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(v.values().size()) * 4);
}
BENCHMARK(BM_AggregateAll)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_PostProcess(benchmark::State& state) {
  const Pair p = make_pair(128);
  const adsm::CostVolume v =
      adsm::aggregate_all(adsm::build_dsi_census(p.left, p.right, 7, 32), adsm::Penalties{});
  const adsm::CostVolume r = adsm::derive_right_dsi(v);
  for (auto _ : state) {
    const adsm::DisparityMap left = adsm::subpixel_refine(v, adsm::wta(v));
    const adsm::DisparityMap right = adsm::wta(r);
    benchmark::DoNotOptimize(adsm::fill_invalid(left, adsm::consistency_check(left, right)));
  }
}
BENCHMARK(BM_PostProcess)->Unit(benchmark::kMillisecond);

void BM_CensusPipeline(benchmark::State& state) {
  const Pair p = make_pair(128);
  adsm::PipelineConfig config;
  config.max_disparity = 32;
  for (auto _ : state) benchmark::DoNotOptimize(adsm::match(p.left, p.right, config));
}
BENCHMARK(BM_CensusPipeline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
