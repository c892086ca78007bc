#include <benchmark/benchmark.h>

#include "wdce/rng.hpp"
#include "wdce/tensor.hpp"
#include "wdce/wavelet.hpp"

namespace {

void BM_DwtForward(benchmark::State& state) {
    const std::size_t frames = static_cast<std::size_t>(state.range(0));
    const auto filters = wdce::build_haar(frames);
    wdce::Rng rng(1);
    auto x = wdce::Tensor::uniform({64, 21, frames}, 1.0, rng);
    for (auto _ : state) {
        auto bands = wdce::dwt(x, filters);
        benchmark::DoNotOptimize(bands.low->data.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DwtForward)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_DwtRoundTrip(benchmark::State& state) {
    const std::size_t frames = static_cast<std::size_t>(state.range(0));
    const auto filters = wdce::build_haar(frames);
    wdce::Rng rng(2);
    auto x = wdce::Tensor::uniform({64, 21, frames}, 1.0, rng);
    for (auto _ : state) {
        auto bands = wdce::dwt(x, filters);
        auto back = wdce::idwt(bands.low, bands.high, filters);
        benchmark::DoNotOptimize(back->data.data());
    }
}
BENCHMARK(BM_DwtRoundTrip)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
