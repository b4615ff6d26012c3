// Serial vs OpenMP kernel timings at the shapes the training loops use.

#include <vector>

#include <benchmark/benchmark.h>

#include "c2f/kernels.hpp"
#include "c2f/rng.hpp"

using namespace c2f;

namespace {

std::vector<double> rand_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

kern::ConvDims stage_dims(int in_c, int out_c, int hw) {
  kern::ConvDims d;
  d.in_c = in_c;
  d.in_h = hw;
  d.in_w = hw;
  d.out_c = out_c;
  d.k = 3;
  d.stride = 1;
  d.pad = 1;
  d.out_h = hw;
  d.out_w = hw;
  return d;
}

template <bool Parallel>
void bm_conv2d_forward(benchmark::State& state) {
  const auto d = stage_dims(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                            static_cast<int>(state.range(2)));
  const auto in = rand_vec(static_cast<std::size_t>(d.in_c) * d.in_h * d.in_w, 1);
  const auto w = rand_vec(static_cast<std::size_t>(d.out_c) * d.in_c * d.k * d.k, 2);
  const auto bias = rand_vec(static_cast<std::size_t>(d.out_c), 3);
  std::vector<double> out(static_cast<std::size_t>(d.out_c) * d.out_h * d.out_w);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kern::omp::conv2d(in.data(), w.data(), bias.data(), out.data(), d);
    } else {
      kern::serial::conv2d(in.data(), w.data(), bias.data(), out.data(), d);
    }
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.out_c) * d.out_h * d.out_w * d.in_c *
                          d.k * d.k);
}

template <bool Parallel>
void bm_conv2d_backward_input(benchmark::State& state) {
  const auto d = stage_dims(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                            static_cast<int>(state.range(2)));
  const auto g = rand_vec(static_cast<std::size_t>(d.out_c) * d.out_h * d.out_w, 4);
  const auto w = rand_vec(static_cast<std::size_t>(d.out_c) * d.in_c * d.k * d.k, 5);
  std::vector<double> din(static_cast<std::size_t>(d.in_c) * d.in_h * d.in_w);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kern::omp::conv2d_acc_din(g.data(), w.data(), din.data(), d);
    } else {
      kern::serial::conv2d_acc_din(g.data(), w.data(), din.data(), d);
    }
    benchmark::DoNotOptimize(din.data());
    benchmark::ClobberMemory();
  }
}

template <bool Parallel>
void bm_matvec(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const auto w = rand_vec(static_cast<std::size_t>(m) * k, 6);
  const auto x = rand_vec(static_cast<std::size_t>(k), 7);
  std::vector<double> out(static_cast<std::size_t>(m));
  for (auto _ : state) {
    if constexpr (Parallel) {
      kern::omp::matvec(w.data(), x.data(), out.data(), m, k);
    } else {
      kern::serial::matvec(w.data(), x.data(), out.data(), m, k);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m) * k);
}

}  // namespace

BENCHMARK(bm_conv2d_forward<false>)->Args({3, 8, 32})->Args({8, 16, 16})->Args({16, 16, 8})->Name("conv2d_fwd/serial");
BENCHMARK(bm_conv2d_forward<true>)->Args({3, 8, 32})->Args({8, 16, 16})->Args({16, 16, 8})->Name("conv2d_fwd/omp");
BENCHMARK(bm_conv2d_backward_input<false>)->Args({8, 16, 16})->Name("conv2d_bwd_din/serial");
BENCHMARK(bm_conv2d_backward_input<true>)->Args({8, 16, 16})->Name("conv2d_bwd_din/omp");
BENCHMARK(bm_matvec<false>)->Args({256, 128})->Args({64, 192})->Name("matvec/serial");
BENCHMARK(bm_matvec<true>)->Args({256, 128})->Args({64, 192})->Name("matvec/omp");

BENCHMARK_MAIN();
