#include <benchmark/benchmark.h>

#include "stgllm/backbone.hpp"
#include "stgllm/metrics.hpp"
#include "stgllm/tensor.hpp"

using namespace stgllm;

namespace {

Mat random_mat(int r, int c, uint64_t seed) {
    Mat m(r, c);
    Rng rng(seed);
    for (auto& v : m.v) v = rng.normal();
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Mat a = random_mat(n, n, 1);
    const Mat b = random_mat(n, n, 2);
    Mat c(n, n);
    for (auto _ : state) {
        matmul(a, b, c);
        benchmark::DoNotOptimize(c.v.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_LayerNorm(benchmark::State& state) {
    const Mat x = random_mat(64, 256, 3);
    Mat g(1, 256), b(1, 256), y;
    for (auto& v : g.v) v = 1.0;
    std::vector<double> mean(64), rstd(64);
    for (auto _ : state) {
        layer_norm_forward(x, g, b, 1e-5, y, &mean, &rstd);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_LayerNorm);

void BM_ComputeMetrics(benchmark::State& state) {
    std::vector<Mat> pred, target;
    for (int w = 0; w < 100; ++w) {
        pred.push_back(random_mat(170, 12, w));
        target.push_back(random_mat(170, 12, 1000 + w));
    }
    for (auto _ : state) {
        auto rep = compute_metrics(pred, target, 0.1);
        benchmark::DoNotOptimize(rep.mae);
    }
}
BENCHMARK(BM_ComputeMetrics);

}  // namespace
