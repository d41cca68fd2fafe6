#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tdalign/loss.hpp"
#include "tdalign/model.hpp"
#include "tdalign/trainer.hpp"

namespace {

using namespace tdalign;

Tensor3 random_tensor(int b, int s, int n, std::uint64_t seed) {
    Tensor3 t(b, s, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : t.data) {
        v = normal(rng);
    }
    return t;
}

constexpr int kBatch = 32;
constexpr int kVars = 7;
constexpr int kLookback = 336;

LossConfig loss_config(LossMode mode) {
    LossConfig cfg;
    cfg.mode = mode;
    return cfg;
}

void BM_LossBaseline(benchmark::State& state) {
    const int H = static_cast<int>(state.range(0));
    const Tensor3 y = random_tensor(kBatch, H, kVars, 1);
    const Tensor3 yhat = random_tensor(kBatch, H, kVars, 2);
    const Tensor3 context = random_tensor(kBatch, 2, kVars, 3);
    const LossConfig cfg = loss_config(LossMode::BaselineOnly);
    for (auto _ : state) {
        benchmark::DoNotOptimize(combined_loss(y, yhat, context, cfg));
    }
}
BENCHMARK(BM_LossBaseline)->Arg(96)->Arg(336)->Arg(720);

void BM_LossTdAlign(benchmark::State& state) {
    const int H = static_cast<int>(state.range(0));
    const Tensor3 y = random_tensor(kBatch, H, kVars, 1);
    const Tensor3 yhat = random_tensor(kBatch, H, kVars, 2);
    const Tensor3 context = random_tensor(kBatch, 2, kVars, 3);
    const LossConfig cfg = loss_config(LossMode::TdAlign);
    for (auto _ : state) {
        benchmark::DoNotOptimize(combined_loss(y, yhat, context, cfg));
    }
}
BENCHMARK(BM_LossTdAlign)->Arg(96)->Arg(336)->Arg(720);

void BM_Decompose(benchmark::State& state) {
    const Tensor3 x = random_tensor(kBatch, kLookback, kVars, 4);
    Tensor3 trend;
    Tensor3 seasonal;
    for (auto _ : state) {
        moving_average_decompose(x, 25, trend, seasonal);
        benchmark::DoNotOptimize(trend.data.data());
    }
}
BENCHMARK(BM_Decompose);

void BM_Forward(benchmark::State& state) {
    const int H = static_cast<int>(state.range(0));
    const ForecasterParams params = init_params(ModelKind::DLinear, kLookback, H, 25, 5);
    const Tensor3 x = random_tensor(kBatch, kLookback, kVars, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, x));
    }
}
BENCHMARK(BM_Forward)->Arg(96)->Arg(720);

void BM_Backward(benchmark::State& state) {
    const int H = static_cast<int>(state.range(0));
    const ForecasterParams params = init_params(ModelKind::DLinear, kLookback, H, 25, 7);
    const Tensor3 x = random_tensor(kBatch, kLookback, kVars, 8);
    const Tensor3 upstream = random_tensor(kBatch, H, kVars, 9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(params, x, upstream));
    }
}
BENCHMARK(BM_Backward)->Arg(96)->Arg(720);

void run_train_step(benchmark::State& state, LossMode mode) {
    const int H = 720;
    ForecasterParams params = init_params(ModelKind::DLinear, kLookback, H, 25, 10);
    const Tensor3 x = random_tensor(kBatch, kLookback, kVars, 11);
    const Tensor3 y = random_tensor(kBatch, H, kVars, 12);

    TrainConfig cfg;
    cfg.loss = loss_config(mode);
    AdamState adam = init_adam(params);

    for (auto _ : state) {
        const Tensor3 yhat = forward(params, x);
        const LossReport report = combined_loss(y, yhat, x, cfg.loss);
        const GradSet grads = backward(params, x, report.grad);
        adam_step(params, grads, adam, cfg);
        benchmark::DoNotOptimize(params.weights[0].data.data());
    }
}

void BM_TrainStepBaseline(benchmark::State& state) {
    run_train_step(state, LossMode::BaselineOnly);
}
BENCHMARK(BM_TrainStepBaseline);

void BM_TrainStepTdAlign(benchmark::State& state) {
    run_train_step(state, LossMode::TdAlign);
}
BENCHMARK(BM_TrainStepTdAlign);

} // namespace

BENCHMARK_MAIN();
