#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tdalign/loss.hpp"
#include "tdalign/model.hpp"
#include "tdalign/series.hpp"
#include "tdalign/trainer.hpp"

namespace tdalign {

/**
 * One experiment described by a single flat JSON document. Unknown keys are
 * rejected so a typo cannot silently change a run. Exactly one of `dataset`
 * (CSV path) or `synth_kind` must be set.
 */
struct ExperimentConfig {
    // data source
    std::string dataset;
    std::string date_column;              // empty = drop a leading "date" column if present
    std::string synth_kind;               // "ar1" | "sine_mix" | "random_walk"
    double synth_phi = 0.9;
    double synth_sigma = 1.0;
    double synth_noise_sigma = 0.0;       // sine_mix observation noise
    std::vector<double> synth_periods{24.0, 168.0};
    std::vector<double> synth_amplitudes{1.0, 0.5};
    int synth_T = 20000;
    int synth_N = 7;
    std::uint64_t synth_seed = 7;

    // task shape
    int lookback = 96;
    int horizon = 96;
    std::string model = "dlinear";        // "linear" | "dlinear"
    int kernel = 25;

    // objective
    std::string loss_base = "mse";        // "mse" | "mae"
    std::string loss_mode = "tdalign";    // baseline|plus_ld|rho_only|fixed_alpha|learnable_alpha|tdalign
    double alpha = 0.5;
    int diff_order = 1;
    int diff_interval = 1;

    // training
    std::vector<double> split{0.6, 0.2, 0.2};
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 10;
    int batch_size = 32;
    int patience = 3;
    int stride = 1;
    bool shuffle = true;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

    // experiment sweeps
    double train_noise_variance = 0.0;    // noise injected into the train split
    std::vector<double> noise_variances{0.0, 0.25, 1.0};
    std::vector<int> sweep_orders{1, 2};
    std::vector<int> sweep_intervals{1, 2};

    std::string out_dir = "runs";

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);

    /** Canonical JSON with every key present, keys sorted. */
    std::string to_json_text() const;

    /** 64-bit hash of the canonical JSON, ignoring out_dir. */
    std::string fingerprint() const;

    void validate() const;

    ModelKind model_kind() const;
    LossConfig loss_config() const;
    TrainConfig train_config(std::uint64_t seed) const;
    SplitSpec split_spec() const;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    MetricsReport metrics;
    int best_epoch = -1;
    int epochs_run = 0;
};

/** Aggregate of one multi-seed run; std is the population deviation over seeds. */
struct RunSummary {
    std::string fingerprint;
    std::string data_fingerprint;
    std::vector<SeedOutcome> per_seed;
    MetricsReport mean;
    MetricsReport stddev;
    double wall_seconds = 0.0;
};

/** Loads or generates the configured series. */
SeriesMatrix build_dataset(const ExperimentConfig& cfg);

/**
 * Full multi-seed run: split, scale, window, fit, evaluate per seed. Writes
 * out_dir/<fingerprint>/seed<k>/{report.csv, checkpoint.txt, metrics.json}
 * and out_dir/<fingerprint>/summary.json.
 */
RunSummary cmd_train(const ExperimentConfig& cfg, bool quiet = false);

/**
 * Runs the five loss modes (baseline, plus_ld, rho_only, learnable_alpha,
 * tdalign) on identical data and seeds; writes a per-mode table next to the
 * individual run directories and fails if the windowed data fingerprints
 * diverge between modes.
 */
std::vector<std::pair<std::string, RunSummary>> cmd_ablate(const ExperimentConfig& cfg,
                                                           bool quiet = false);

/** One TDAlign run per (order, interval) pair; writes a sweep table. */
std::vector<std::pair<DiffSpec, RunSummary>> cmd_sweep_diffspec(const ExperimentConfig& cfg,
                                                                const std::vector<int>& orders,
                                                                const std::vector<int>& intervals,
                                                                bool quiet = false);

/**
 * Trains baseline and TDAlign at every noise variance (noise goes into the
 * train split only; val/test stay clean); writes paired curves.
 */
struct NoiseSweepRow {
    double variance = 0.0;
    std::string mode;
    RunSummary summary;
};
std::vector<NoiseSweepRow> cmd_sweep_noise(const ExperimentConfig& cfg,
                                           const std::vector<double>& variances,
                                           bool quiet = false);

/**
 * Runs the closed-form identity and Monte Carlo checks on seeded random
 * instances and writes a pass/fail report with measured errors; returns
 * false if any check fails.
 */
bool cmd_verify_theory(const std::string& out_path, std::uint64_t seed, bool quiet = false);

/**
 * Merges every report.csv under the given run directories into a tidy CSV
 * (one row per run, seed, epoch, metric) plus small self-contained SVG
 * charts of the validation MSE and total training loss.
 */
void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

/** Generates the configured synthetic dataset and writes it as CSV. */
std::string cmd_synth(const ExperimentConfig& cfg, const std::string& out_path);

} // namespace tdalign
