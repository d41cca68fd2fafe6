#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdalign/tensor.hpp"

namespace tdalign {

/**
 * Multivariate time series: rows are time steps in file order, columns are
 * variables. An optional date column in the source CSV is used for ordering
 * sanity only and is never part of the values.
 */
struct SeriesMatrix {
    Matrix values;                    // T x N
    std::vector<std::string> names;   // one per column
    std::string granularity;          // free-form note ("hourly", "synthetic", ...)

    int rows() const { return values.n_rows; }
    int cols() const { return values.n_cols; }
    double& at(int t, int j) { return values.at(t, j); }
    double at(int t, int j) const { return values.at(t, j); }
    bool empty() const { return values.n_rows == 0; }

    /** Copy of rows [first, last). */
    SeriesMatrix slice_rows(int first, int last) const;
};

/** Fractions of rows assigned to each split; must sum to 1. */
struct SplitSpec {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

/**
 * Chronological split result. The val and test matrices carry `lookback`
 * extra context rows on the left so their first forecast window can start at
 * the first row of their target region; `*_targets` counts target rows only.
 */
struct SplitResult {
    SeriesMatrix train;
    SeriesMatrix val;
    SeriesMatrix test;
    int train_targets = 0;
    int val_targets = 0;
    int test_targets = 0;
};

/** Per-column z-score scaler. Fit on the train split only. */
struct ZScoreScaler {
    std::vector<double> mean;
    std::vector<double> std;

    SeriesMatrix transform(const SeriesMatrix& s) const;
    SeriesMatrix inverse(const SeriesMatrix& s) const;
};

/**
 * Enumeration of forecast windows over a series: window w reads input rows
 * [starts[w], starts[w]+lookback) and target rows [starts[w]+lookback,
 * starts[w]+lookback+horizon).
 */
struct WindowLayout {
    int lookback = 0;
    int horizon = 0;
    int stride = 1;
    std::vector<int> starts;

    int count() const { return static_cast<int>(starts.size()); }
};

/** A materialized batch of windows. */
struct WindowBatch {
    Tensor3 inputs;   // B x L x N
    Matrix anchor;    // B x N, last input row of each window
    Tensor3 targets;  // B x H x N

    /** Last `rows` input rows of each window, as B x rows x N. */
    Tensor3 input_tail(int rows) const;
};

/**
 * Loads a CSV with a header row. If `date_column` is set, that column is
 * dropped from the features (error if absent); otherwise a first column
 * literally named "date" is dropped automatically. All remaining cells must
 * be finite numbers.
 */
SeriesMatrix load_csv(const std::string& path,
                      const std::optional<std::string>& date_column = std::nullopt);

/** Writes header + values with round-trip precision. */
void write_csv(const SeriesMatrix& s, const std::string& path);

/**
 * Splits rows chronologically by floor(ratio * T); the last split with a
 * nonzero ratio absorbs the rounding remainder so the target regions cover
 * [0, T) exactly. Splits with ratio 0 come back empty.
 */
SplitResult chronological_split(const SeriesMatrix& s, const SplitSpec& spec, int lookback);

/** Population mean/std per column; std is floored at 1e-8. Needs T >= 2. */
ZScoreScaler fit_scaler(const SeriesMatrix& train);

/** Dense window enumeration; count = floor((T - L - H) / stride) + 1, or 0. */
WindowLayout make_windows(const SeriesMatrix& s, int lookback, int horizon, int stride = 1);

/** Materializes the windows selected by `which` (indices into layout.starts). */
WindowBatch gather_windows(const SeriesMatrix& s, const WindowLayout& layout,
                           const std::vector<int>& which);

/** Materializes every window in the layout. */
WindowBatch gather_all_windows(const SeriesMatrix& s, const WindowLayout& layout);

/** Adds i.i.d. N(0, variance) noise to every cell. */
SeriesMatrix inject_gaussian_noise(const SeriesMatrix& s, double variance, std::uint64_t seed);

/** AR(1): x_t = phi * x_{t-1} + N(0, sigma^2), started at 0; |phi| < 1. */
SeriesMatrix gen_ar1(double phi, double sigma, int T, int N, std::uint64_t seed);

/**
 * Sum of sinusoids with per-column random phases plus N(0, noise_sigma^2)
 * noise; `periods` and `amplitudes` must have equal length.
 */
SeriesMatrix gen_sine_mix(const std::vector<double>& periods,
                          const std::vector<double>& amplitudes,
                          double noise_sigma, int T, int N, std::uint64_t seed);

/** Random walk: x_t = x_{t-1} + N(0, sigma^2), started at 0. */
SeriesMatrix gen_random_walk(double sigma, int T, int N, std::uint64_t seed);

} // namespace tdalign
