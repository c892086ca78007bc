#include <benchmark/benchmark.h>

#include "wdce/ops.hpp"
#include "wdce/rng.hpp"
#include "wdce/tensor.hpp"

namespace {

void BM_Conv2dTemporal(benchmark::State& state) {
    const std::size_t channels = static_cast<std::size_t>(state.range(0));
    wdce::Rng rng(3);
    auto x = wdce::Tensor::uniform({32, channels, 32, 7}, 1.0, rng);
    auto w = wdce::Tensor::uniform({channels, channels, 3, 1}, 0.2, rng);
    auto b = wdce::Tensor::zeros({channels});
    for (auto _ : state) {
        auto y = wdce::conv2d(x, w, b, 1, 0);
        benchmark::DoNotOptimize(y->data.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Conv2dTemporal)->RangeMultiplier(2)->Range(4, 32)->Complexity();

void BM_BatchedMatmul(benchmark::State& state) {
    wdce::Rng rng(4);
    auto a = wdce::Tensor::uniform({128, 16, 8}, 1.0, rng);
    auto b = wdce::Tensor::uniform({128, 8, 16}, 1.0, rng);
    for (auto _ : state) {
        auto y = wdce::bmm(a, b);
        benchmark::DoNotOptimize(y->data.data());
    }
}
BENCHMARK(BM_BatchedMatmul);

void BM_SoftmaxLastAxis(benchmark::State& state) {
    wdce::Rng rng(5);
    auto x = wdce::Tensor::uniform({256, 16, 7}, 2.0, rng);
    for (auto _ : state) {
        auto y = wdce::softmax(x, 2);
        benchmark::DoNotOptimize(y->data.data());
    }
}
BENCHMARK(BM_SoftmaxLastAxis);

}  // namespace
