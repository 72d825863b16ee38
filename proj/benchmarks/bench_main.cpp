// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "texstat/autodiff.hpp"
#include "texstat/ops.hpp"
#include "texstat/rng.hpp"
#include "texstat/spatial_stats.hpp"
#include "texstat/train.hpp"
#include "texstat/vae.hpp"

using namespace texstat;

namespace {

Image noise(std::size_t h, std::size_t w, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  Image img(h, w);
  for (Scalar& v : img.pixels()) v = Scalar(rng.uniform01());
  return img;
}

Tensor noise(Shape shape, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  Tensor t(std::move(shape));
  for (Scalar& v : t.values()) v = Scalar(rng.uniform01() - 0.5);
  return t;
}

void BM_Autocorrelation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Image img = noise(n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(stats::autocorrelation(img));
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_Autocorrelation)->RangeMultiplier(2)->Range(16, 256)->Complexity();

// Power-of-two sizes take the radix-2 path, the others the plain DFT.
void BM_AutocorrelationOddSize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Image img = noise(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(stats::autocorrelation(img));
}
BENCHMARK(BM_AutocorrelationOddSize)->Arg(15)->Arg(33)->Arg(63);

void BM_BruteForceAutocorrelation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Image img = noise(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(stats::brute_force_autocorr(img));
}
BENCHMARK(BM_BruteForceAutocorrelation)->Arg(16)->Arg(32);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c_in = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  const Tensor x = noise({c_in, size, size}, 4);
  const Tensor k = noise({2 * c_in, c_in, 3, 3}, 5);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var xv = tape.variable(x);
    ad::Var kv = tape.variable(k);
    tape.backward(ad::reduce_sum(ad::conv2d(xv, kv, 2, 1)));
    benchmark::DoNotOptimize(kv.grad());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({1, 64})->Args({16, 32})->Args({64, 8});

void BM_StatsLossGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Image target = noise(n, n, 6);
  const Tensor guess = noise({1, n, n}, 7);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var v = tape.variable(guess);
    tape.backward(stats::stats_loss(target, v, stats::Metric::mse));
    benchmark::DoNotOptimize(v.grad());
  }
}
BENCHMARK(BM_StatsLossGradient)->Arg(32)->Arg(64);

void BM_SampleGradient(benchmark::State& state) {
  vae::Architecture arch;
  const vae::ModelParams params = vae::init_params(arch, 8);
  const Image img = noise(arch.height, arch.width, 9);
  const Tensor eps = noise({arch.latent_dim}, 10);
  const vae::LossWeights weights{1.0, 1.0,
                                 state.range(0) ? vae::LossMode::stats : vae::LossMode::data,
                                 stats::Metric::mse};
  for (auto _ : state) benchmark::DoNotOptimize(vae::sample_gradient(params, img, eps, weights));
  state.SetLabel(state.range(0) ? "stats loss" : "data loss");
}
BENCHMARK(BM_SampleGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
