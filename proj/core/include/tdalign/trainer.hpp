#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdalign/loss.hpp"
#include "tdalign/model.hpp"
#include "tdalign/series.hpp"

namespace tdalign {

/** Stateless seed mixer for deriving stream seeds (init, per-epoch shuffles). */
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 10;
    int batch_size = 32;
    int patience = 3;       // consecutive epochs without val-MSE improvement tolerated
    int stride = 1;
    bool shuffle = true;
    std::uint64_t seed = 0;
    LossConfig loss;

    void validate() const;
};

/** Adam first/second moment mirrors for every parameter array. */
struct AdamState {
    GradSet m;
    GradSet v;
    std::int64_t step = 0;
};

/**
 * Loss mixing weight alpha = sigmoid(logit), trained by the same Adam rule as
 * the model parameters; logit 0 starts alpha at 0.5.
 */
struct AlphaState {
    double logit = 0.0;
    double m = 0.0;
    double v = 0.0;
    std::int64_t step = 0;

    double alpha() const;
};

/** Per-epoch training curves plus validation metrics. */
struct TrainReport {
    std::vector<double> train_ly;
    std::vector<double> train_ld;
    std::vector<double> train_rho;
    std::vector<double> train_total;
    std::vector<double> val_mse;
    std::vector<double> val_mse_d;
    std::vector<double> val_rho;
    std::vector<double> seconds;
    int best_epoch = -1;    // 0-based index into the vectors

    int epochs_run() const { return static_cast<int>(train_ly.size()); }

    /**
     * CSV with columns epoch, train_ly, train_ld, train_rho, train_total,
     * val_mse, val_mse_d, val_rho, seconds. A leading '#' comment line carries
     * `note` when non-empty.
     */
    void to_csv(const std::string& path, const std::string& note = "") const;
};

struct EpochStats {
    double loss_y = 0.0;
    double loss_d = 0.0;
    double rho = 0.0;
    double total = 0.0;
};

struct FitResult {
    ForecasterParams params;   // parameters of the best validation epoch
    TrainReport report;
    AlphaState alpha;          // final alpha state (LearnableAlpha mode)
};

/** One bias-corrected Adam update over every parameter array. */
void adam_step(ForecasterParams& params, const GradSet& grads, AdamState& state,
               const TrainConfig& cfg);

/** Fresh zeroed optimizer state shaped like `params`. */
AdamState init_adam(const ForecasterParams& params);

/**
 * One pass over the training windows in seeded shuffled order; updates
 * `params` (and `alpha` in LearnableAlpha mode) in place and returns the
 * window-weighted mean loss components.
 */
EpochStats train_epoch(ForecasterParams& params, const SeriesMatrix& train,
                       const WindowLayout& layout, const TrainConfig& cfg, AdamState& adam,
                       AlphaState& alpha, int epoch_index);

/**
 * Trains for up to cfg.epochs epochs with early stopping on validation MSE;
 * returns the parameters of the best validation epoch. `train` and `val` must
 * hold enough rows for at least one window each.
 */
FitResult fit(const ForecasterParams& initial, const SeriesMatrix& train, const SeriesMatrix& val,
              const TrainConfig& cfg);

/**
 * Mean of per-window evaluation metrics over every window of `series`
 * (equal weight per window), on the scale of the data as given.
 */
MetricsReport evaluate(const ForecasterParams& params, const SeriesMatrix& series, int stride = 1,
                       int batch_size = 256);

} // namespace tdalign
