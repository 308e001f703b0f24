#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "../tests/oracles.hpp"
#include "vessel/kernels.hpp"
#include "vessel/preprocess.hpp"

using namespace vessel;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Decoder-like 3x3 conv at width 1/8: 32 -> 32 channels on a 56x56 map.
ConvGeometry conv_geometry() {
  ConvGeometry g;
  g.batch = 2;
  g.in_channels = g.out_channels = 32;
  g.in_h = g.in_w = 56;
  g.kernel_h = g.kernel_w = 3;
  g.pad_h = g.pad_w = 1;
  return g;
}

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state) {
  const ConvGeometry g = conv_geometry();
  const auto x = noise(g.batch * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = noise(g.out_channels * g.patch_size(), 2);
  const auto b = noise(g.out_channels, 3);
  std::vector<float> y(g.batch * g.out_channels * g.out_h() * g.out_w());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv2d_forward<float>(g, x, w, b, y);
    } else {
      reference::conv2d_forward<float>(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& state) {
  const ConvGeometry g = conv_geometry();
  const auto x = noise(g.batch * g.in_channels * g.in_h * g.in_w, 1);
  const auto w = noise(g.out_channels * g.patch_size(), 2);
  const auto dy = noise(g.batch * g.out_channels * g.out_h() * g.out_w(), 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    std::fill(dx.begin(), dx.end(), 0.0f);
    std::fill(dw.begin(), dw.end(), 0.0f);
    std::fill(db.begin(), db.end(), 0.0f);
    if constexpr (Parallel) {
      kernels::conv2d_backward<float>(g, x, w, dy, dx, dw, db);
    } else {
      reference::conv2d_backward<float>(g, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Parallel>
void BM_GroupNorm(benchmark::State& state) {
  const NormGeometry g{2, 64, 56 * 56, 16};
  const auto x = noise(g.batch * g.channels * g.spatial, 4);
  std::vector<float> gamma(g.channels, 1.0f), beta(g.channels, 0.0f), y(x.size()), xhat(x.size());
  std::vector<float> mean(g.batch * g.groups), rstd(g.batch * g.groups);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::group_norm_forward<float>(g, 1e-5f, x, gamma, beta, y, xhat, mean, rstd);
    } else {
      reference::group_norm_forward<float>(g, 1e-5f, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

template <bool Parallel>
void BM_Median5(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  Image img(size, size, 3);
  std::mt19937_64 rng(5);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng());
  for (auto _ : state) {
    Image out = Parallel ? median_filter5(img) : testing::median5_oracle(img);
    benchmark::DoNotOptimize(out.pixels.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.pixels.size()));
}

}  // namespace

BENCHMARK(BM_Conv2dForward<false>)->Name("conv2d_forward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dForward<true>)->Name("conv2d_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackward<false>)->Name("conv2d_backward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackward<true>)->Name("conv2d_backward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GroupNorm<false>)->Name("group_norm/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GroupNorm<true>)->Name("group_norm/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Median5<false>)->Name("median5/reference")->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Median5<true>)->Name("median5/parallel")->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
