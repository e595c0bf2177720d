#include "flowlab/evalkit.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/mlp.hpp"

#include <benchmark/benchmark.h>

using namespace flowlab;

namespace {

Mlp bench_net(int dim, int hidden) {
  SeededRng rng(1);
  return Mlp::random(MlpShape{dim, 8, {hidden, hidden}}, rng);
}

void BM_Forward(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  const Mlp net = bench_net(dim, 256);
  SeededRng rng(2);
  const PointSet x = gaussian_batch(rng, dim, batch);
  const std::vector<double> t(batch, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(net, x, t));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Forward)->Args({2, 256})->Args({64, 256})->Args({256, 256});

void BM_ForwardBackward(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  const Mlp net = bench_net(dim, 256);
  SeededRng rng(3);
  const PointSet x = gaussian_batch(rng, dim, batch);
  const PointSet up = gaussian_batch(rng, dim, batch);
  const std::vector<double> t(batch, 0.5);
  for (auto _ : state) {
    const ForwardPass pass = forward_pass(net, x, t);
    benchmark::DoNotOptimize(mlp_backward(net, pass, up));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Args({2, 256})->Args({64, 256})->Args({256, 256});

void BM_EulerSample(benchmark::State& state) {
  const int steps = static_cast<int>(state.range(0));
  const Mlp net = bench_net(64, 256);
  SeededRng rng(4);
  const PointSet noise = gaussian_batch(rng, 64, 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(euler_sample_batch(net, noise, SamplerConfig{steps}));
  }
}
BENCHMARK(BM_EulerSample)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Mmd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SeededRng rng(5);
  const PointSet a = gaussian_batch(rng, 2, n);
  const PointSet b = gaussian_batch(rng, 2, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmd_unbiased(a, b, 1.0));
  }
}
BENCHMARK(BM_Mmd)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_GaussianBatch(benchmark::State& state) {
  SeededRng rng(6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gaussian_batch(rng, 64, 512));
  }
}
BENCHMARK(BM_GaussianBatch);

}  // namespace

BENCHMARK_MAIN();
