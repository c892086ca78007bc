#include <benchmark/benchmark.h>

#include "wdce/commands.hpp"
#include "wdce/config.hpp"
#include "wdce/data.hpp"
#include "wdce/model.hpp"

namespace {

struct Fixture {
    wdce::RunConfig cfg = wdce::cli::ablation_default_config();
    wdce::Dataset data;
    Fixture() {
        cfg.synth.samples_per_class = 10;
        data = wdce::generate(cfg.synth);
    }
};

void BM_ForwardFullModel(benchmark::State& state) {
    Fixture f;
    wdce::WdceModel model(f.cfg.backbone, f.cfg.train, wdce::toy_skeleton(f.cfg.synth.joints), 3,
                          f.cfg.synth.frames, f.cfg.synth.classes());
    std::vector<std::size_t> idx(32);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [batch, labels] = wdce::make_batch(f.data, idx);
    for (auto _ : state) {
        auto out = model.forward(batch);
        benchmark::DoNotOptimize(out.logits_fuse->data.data());
    }
}
BENCHMARK(BM_ForwardFullModel);

void BM_TrainStepFullModel(benchmark::State& state) {
    Fixture f;
    wdce::WdceModel model(f.cfg.backbone, f.cfg.train, wdce::toy_skeleton(f.cfg.synth.joints), 3,
                          f.cfg.synth.frames, f.cfg.synth.classes());
    wdce::SgdOptimizer opt(model.parameters(), 0.01, 0.9, 0.0004);
    std::vector<std::size_t> idx(32);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [batch, labels] = wdce::make_batch(f.data, idx);
    for (auto _ : state) {
        auto metrics = wdce::train_step(model, opt, batch, labels);
        benchmark::DoNotOptimize(metrics.loss_total);
    }
}
BENCHMARK(BM_TrainStepFullModel);

}  // namespace
