#include <benchmark/benchmark.h>

#include "stgllm/backbone.hpp"
#include "stgllm/gradcheck.hpp"
#include "stgllm/model.hpp"
#include "stgllm/training.hpp"

using namespace stgllm;

namespace {

ModelConfig desk20() {
    ModelConfig cfg = ModelConfig::desk();  // 2 layers, D=64
    return cfg;
}

void BM_BackboneForward(benchmark::State& state) {
    const ModelConfig cfg = desk20();
    ParamStore store;
    for (const auto& spec : build_param_specs(cfg)) store.add(spec);
    store.init_random(1);
    const auto w = BackboneWeights::from_store(store, cfg.backbone.n_layers);
    Mat tokens(static_cast<int>(state.range(0)), cfg.backbone.d_model);
    Rng rng(2);
    for (auto& v : tokens.v) v = rng.normal();
    for (auto _ : state) {
        Mat h = backbone_forward(tokens, w, cfg.backbone, 0, nullptr);
        benchmark::DoNotOptimize(h.v.data());
    }
}
BENCHMARK(BM_BackboneForward)->Arg(20)->Arg(170);

void BM_PredictDesk20(benchmark::State& state) {
    const ModelConfig cfg = desk20();
    ForecastModel model = ForecastModel::random_init(cfg, 1);
    model.set_scaler(Scaler{100.0, 30.0});
    const auto windows = make_random_windows(cfg, 20, 1, 3);
    for (auto _ : state) {
        Mat pred = model.predict(windows[0]);
        benchmark::DoNotOptimize(pred.v.data());
    }
}
BENCHMARK(BM_PredictDesk20);

void BM_TrainStepDesk20(benchmark::State& state) {
    const ModelConfig cfg = desk20();
    ForecastModel model = ForecastModel::random_init(cfg, 1);
    model.set_scaler(Scaler{100.0, 30.0});
    const auto windows = make_random_windows(cfg, 20, 64, 3);
    std::vector<const WindowSample*> batch;
    for (const auto& w : windows) batch.push_back(&w);
    GradStore grads(model.params());
    for (auto _ : state) {
        grads.zero();
        const double loss = batch_forward_backward(model, batch, 1.0, grads);
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStepDesk20);

}  // namespace

BENCHMARK_MAIN();
