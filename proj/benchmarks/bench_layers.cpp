#include <benchmark/benchmark.h>

#include <random>

#include "adsm/layers.hpp"
#include "adsm/network.hpp"
#include "adsm/training.hpp"

namespace {

adsm::Tensor noise(int h, int w, int c) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  adsm::Tensor t(h, w, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  adsm::ConvLayer layer(adsm::Geometry{10, 1, 0}, c, c, true);
  const adsm::Tensor x = noise(37, 237, c);
  for (auto _ : state) benchmark::DoNotOptimize(adsm::conv_forward(x, layer));
}
BENCHMARK(BM_ConvForward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_DeconvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  adsm::DeconvLayer layer(adsm::Geometry{5, 1, 0}, c, c, true);
  const adsm::Tensor x = noise(37, 237, c);
  for (auto _ : state) benchmark::DoNotOptimize(adsm::deconv_forward(x, layer));
}
BENCHMARK(BM_DeconvForward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_FeatureStrip(benchmark::State& state) {
  const adsm::FeatureExtractor net = adsm::build_network("37-1Deconv(5)&4Conv", 16, 1);
  const adsm::Tensor strip = noise(37, 237, 1);
  for (auto _ : state) benchmark::DoNotOptimize(adsm::extract_features(net, strip));
}
BENCHMARK(BM_FeatureStrip)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const adsm::FeatureExtractor net = adsm::build_network("1Deconv(3)&2Conv(8)@13", 8, 1);
  std::vector<adsm::TrainingSample> batch;
  for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
    adsm::TrainingSample s;
    s.left_patch = noise(13, 13, 1);
    s.right_strip = noise(13, 13 + adsm::kStripExtra, 1);
    s.label = adsm::make_label();
    batch.push_back(std::move(s));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(adsm::forward_backward(net, batch, adsm::NormMode::Batch));
}
BENCHMARK(BM_TrainingStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
