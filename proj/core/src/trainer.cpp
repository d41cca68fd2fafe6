#include "tdalign/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tdalign {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void TrainConfig::validate() const {
    if (lr <= 0) {
        throw std::invalid_argument("TrainConfig: lr must be positive");
    }
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw std::invalid_argument("TrainConfig: betas must lie in [0, 1)");
    }
    if (eps <= 0) {
        throw std::invalid_argument("TrainConfig: eps must be positive");
    }
    if (epochs < 1) {
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
    if (patience < 1) {
        throw std::invalid_argument("TrainConfig: patience must be >= 1");
    }
    if (stride < 1) {
        throw std::invalid_argument("TrainConfig: stride must be >= 1");
    }
}

double AlphaState::alpha() const {
    return 1.0 / (1.0 + std::exp(-logit));
}

AdamState init_adam(const ForecasterParams& params) {
    AdamState state;
    state.m = zero_grads(params);
    state.v = zero_grads(params);
    return state;
}

namespace {

void adam_update_array(double* p, double* m, double* v, const double* g, std::size_t n,
                       const TrainConfig& cfg, double bias1, double bias2,
                       const std::string& array_name) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(g[i])) {
            throw std::runtime_error("adam_step: non-finite gradient in '" + array_name + "'");
        }
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

} // namespace

void adam_step(ForecasterParams& params, const GradSet& grads, AdamState& state,
               const TrainConfig& cfg) {
    if (grads.weights.size() != params.weights.size() ||
        grads.biases.size() != params.biases.size()) {
        throw std::invalid_argument("adam_step: gradient blocks disagree with parameters");
    }

    state.step += 1;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const std::vector<std::string> names = params.array_names();

    for (std::size_t blk = 0; blk < params.weights.size(); ++blk) {
        adam_update_array(params.weights[blk].data.data(), state.m.weights[blk].data.data(),
                          state.v.weights[blk].data.data(), grads.weights[blk].data.data(),
                          params.weights[blk].size(), cfg, bias1, bias2, names[blk]);
    }
    for (std::size_t blk = 0; blk < params.biases.size(); ++blk) {
        adam_update_array(params.biases[blk].data(), state.m.biases[blk].data(),
                          state.v.biases[blk].data(), grads.biases[blk].data(),
                          params.biases[blk].size(), cfg, bias1, bias2,
                          names[params.weights.size() + blk]);
    }
}

namespace {

void adam_step_alpha(AlphaState& alpha, double grad, const TrainConfig& cfg) {
    if (!std::isfinite(grad)) {
        throw std::runtime_error("adam_step: non-finite gradient in 'alpha_logit'");
    }
    alpha.step += 1;
    alpha.m = cfg.beta1 * alpha.m + (1.0 - cfg.beta1) * grad;
    alpha.v = cfg.beta2 * alpha.v + (1.0 - cfg.beta2) * grad * grad;
    const double mhat = alpha.m / (1.0 - std::pow(cfg.beta1, static_cast<double>(alpha.step)));
    const double vhat = alpha.v / (1.0 - std::pow(cfg.beta2, static_cast<double>(alpha.step)));
    alpha.logit -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
}

int context_rows(const LossConfig& loss) {
    return loss.diff.order * loss.diff.interval;
}

} // namespace

EpochStats train_epoch(ForecasterParams& params, const SeriesMatrix& train,
                       const WindowLayout& layout, const TrainConfig& cfg, AdamState& adam,
                       AlphaState& alpha, int epoch_index) {
    if (layout.count() == 0) {
        throw std::invalid_argument("train_epoch: no training windows");
    }
    if (context_rows(cfg.loss) > layout.lookback) {
        throw std::invalid_argument("train_epoch: differencing needs more context than the lookback provides");
    }

    std::vector<int> order(static_cast<std::size_t>(layout.count()));
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch_index) + 1));
        std::shuffle(order.begin(), order.end(), rng);
    }

    EpochStats stats;
    double weight = 0.0;
    const int ctx = context_rows(cfg.loss);

    for (std::size_t ofs = 0; ofs < order.size(); ofs += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), ofs + cfg.batch_size);
        const std::vector<int> which(order.begin() + ofs, order.begin() + end);
        const WindowBatch batch = gather_windows(train, layout, which);

        LossConfig loss_cfg = cfg.loss;
        if (loss_cfg.mode == LossMode::LearnableAlpha) {
            loss_cfg.alpha = alpha.alpha();
        }

        const Tensor3 yhat = forward(params, batch.inputs);
        const LossReport report = combined_loss(batch.targets, yhat, batch.input_tail(ctx), loss_cfg);
        if (!std::isfinite(report.total)) {
            throw std::runtime_error("train_epoch: non-finite training loss");
        }

        const GradSet grads = backward(params, batch.inputs, report.grad);
        adam_step(params, grads, adam, cfg);

        if (loss_cfg.mode == LossMode::LearnableAlpha) {
            const double a = loss_cfg.alpha;
            adam_step_alpha(alpha, (report.loss_y - report.loss_d) * a * (1.0 - a), cfg);
        }

        const double w = static_cast<double>(which.size());
        stats.loss_y += report.loss_y * w;
        stats.loss_d += report.loss_d * w;
        stats.rho += report.rho * w;
        stats.total += report.total * w;
        weight += w;
    }

    stats.loss_y /= weight;
    stats.loss_d /= weight;
    stats.rho /= weight;
    stats.total /= weight;
    return stats;
}

MetricsReport evaluate(const ForecasterParams& params, const SeriesMatrix& series, int stride,
                       int batch_size) {
    const WindowLayout layout = make_windows(series, params.lookback, params.horizon, stride);
    if (layout.count() == 0) {
        throw std::invalid_argument("evaluate: series yields no windows");
    }

    MetricsReport acc;
    double windows = 0.0;
    for (int ofs = 0; ofs < layout.count(); ofs += batch_size) {
        const int end = std::min(layout.count(), ofs + batch_size);
        std::vector<int> which(static_cast<std::size_t>(end - ofs));
        std::iota(which.begin(), which.end(), ofs);
        const WindowBatch batch = gather_windows(series, layout, which);
        const Tensor3 yhat = forward(params, batch.inputs);
        const MetricsReport m = evaluate_metrics(batch.targets, yhat, batch.anchor);

        const double w = static_cast<double>(which.size());
        acc.mse += m.mse * w;
        acc.mae += m.mae * w;
        acc.mse_d += m.mse_d * w;
        acc.mae_d += m.mae_d * w;
        acc.rho += m.rho * w;
        windows += w;
    }
    acc.mse /= windows;
    acc.mae /= windows;
    acc.mse_d /= windows;
    acc.mae_d /= windows;
    acc.rho /= windows;
    return acc;
}

FitResult fit(const ForecasterParams& initial, const SeriesMatrix& train, const SeriesMatrix& val,
              const TrainConfig& cfg) {
    cfg.validate();

    const WindowLayout train_layout =
        make_windows(train, initial.lookback, initial.horizon, cfg.stride);
    if (train_layout.count() == 0) {
        throw std::invalid_argument("fit: train split yields no windows for this lookback/horizon");
    }
    const WindowLayout val_layout = make_windows(val, initial.lookback, initial.horizon, cfg.stride);
    if (val_layout.count() == 0) {
        throw std::invalid_argument("fit: val split yields no windows for this lookback/horizon");
    }

    FitResult result;
    result.params = initial;
    ForecasterParams current = initial;
    AdamState adam = init_adam(current);
    AlphaState alpha;

    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const EpochStats stats = train_epoch(current, train, train_layout, cfg, adam, alpha, epoch);
        const MetricsReport val_metrics = evaluate(current, val, cfg.stride, cfg.batch_size);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

        result.report.train_ly.push_back(stats.loss_y);
        result.report.train_ld.push_back(stats.loss_d);
        result.report.train_rho.push_back(stats.rho);
        result.report.train_total.push_back(stats.total);
        result.report.val_mse.push_back(val_metrics.mse);
        result.report.val_mse_d.push_back(val_metrics.mse_d);
        result.report.val_rho.push_back(val_metrics.rho);
        result.report.seconds.push_back(elapsed.count());

        if (val_metrics.mse < best_val) {
            best_val = val_metrics.mse;
            result.report.best_epoch = epoch;
            result.params = current;
            result.alpha = alpha;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if (bad_epochs >= cfg.patience) {
                break;
            }
        }
    }
    return result;
}

void TrainReport::to_csv(const std::string& path, const std::string& note) const {
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("TrainReport::to_csv: cannot open '" + path + "' for writing");
    }
    if (!note.empty()) {
        out << "# " << note << '\n';
    }
    out << "epoch,train_ly,train_ld,train_rho,train_total,val_mse,val_mse_d,val_rho,seconds\n";
    char buf[240];
    for (int e = 0; e < epochs_run(); ++e) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", e, train_ly[e],
                      train_ld[e], train_rho[e], train_total[e], val_mse[e], val_mse_d[e],
                      val_rho[e], seconds[e]);
        out << buf;
    }
    if (!out) {
        throw std::runtime_error("TrainReport::to_csv: write to '" + path + "' failed");
    }
}

} // namespace tdalign
