#include "tdalign/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tdalign/theory.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace tdalign {

namespace {

constexpr std::array kKnownKeys = {
    "dataset",        "date_column",     "synth_kind",       "synth_phi",
    "synth_sigma",    "synth_noise_sigma", "synth_periods",  "synth_amplitudes",
    "synth_T",        "synth_N",         "synth_seed",       "lookback",
    "horizon",        "model",           "kernel",           "loss_base",
    "loss_mode",      "alpha",           "diff_order",       "diff_interval",
    "split",          "lr",              "beta1",            "beta2",
    "adam_eps",       "epochs",          "batch_size",       "patience",
    "stride",         "shuffle",         "seeds",            "train_noise_variance",
    "noise_variances", "sweep_orders",   "sweep_intervals",  "out_dir",
};

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        it->get_to(out);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json metrics_to_json(const MetricsReport& m) {
    return json{{"mse", m.mse}, {"mae", m.mae}, {"mse_d", m.mse_d}, {"mae_d", m.mae_d}, {"rho", m.rho}};
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write to '" + path.string() + "' failed");
    }
}

struct PreparedData {
    SeriesMatrix train;
    SeriesMatrix val;
    SeriesMatrix test;
    std::string data_fingerprint;
};

std::uint64_t hash_series(const SeriesMatrix& s, std::uint64_t h) {
    const int dims[2] = {s.rows(), s.cols()};
    h = fnv1a(dims, sizeof(dims), h);
    return fnv1a(s.values.data.data(), s.values.data.size() * sizeof(double), h);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    const SeriesMatrix raw = build_dataset(cfg);
    SplitResult split = chronological_split(raw, cfg.split_spec(), cfg.lookback);
    if (cfg.train_noise_variance > 0.0) {
        split.train = inject_gaussian_noise(split.train, cfg.train_noise_variance,
                                            mix_seed(cfg.synth_seed, 0x6e6f6973ULL));
    }
    const ZScoreScaler scaler = fit_scaler(split.train);

    PreparedData out;
    out.train = scaler.transform(split.train);
    out.val = scaler.transform(split.val);
    out.test = scaler.transform(split.test);

    std::uint64_t h = fnv1a(&cfg.lookback, sizeof(cfg.lookback));
    h = fnv1a(&cfg.horizon, sizeof(cfg.horizon), h);
    h = fnv1a(&cfg.stride, sizeof(cfg.stride), h);
    h = hash_series(out.train, h);
    h = hash_series(out.val, h);
    h = hash_series(out.test, h);
    out.data_fingerprint = to_hex(h);
    return out;
}

struct SeedRun {
    SeedOutcome outcome;
    FitResult fit_result;
};

SeedRun run_seed(const ExperimentConfig& cfg, const PreparedData& data, std::uint64_t seed) {
    const ForecasterParams initial =
        init_params(cfg.model_kind(), cfg.lookback, cfg.horizon, cfg.kernel, mix_seed(seed, 0));

    SeedRun run;
    run.fit_result = fit(initial, data.train, data.val, cfg.train_config(seed));
    run.outcome.seed = seed;
    run.outcome.metrics = evaluate(run.fit_result.params, data.test, cfg.stride);
    run.outcome.best_epoch = run.fit_result.report.best_epoch;
    run.outcome.epochs_run = run.fit_result.report.epochs_run();
    return run;
}

void accumulate_mean_std(const std::vector<SeedOutcome>& outcomes, MetricsReport& mean,
                         MetricsReport& stddev) {
    const double n = static_cast<double>(outcomes.size());
    const auto fields = {&MetricsReport::mse, &MetricsReport::mae, &MetricsReport::mse_d,
                         &MetricsReport::mae_d, &MetricsReport::rho};
    for (auto field : fields) {
        double m = 0.0;
        for (const SeedOutcome& o : outcomes) {
            m += o.metrics.*field;
        }
        m /= n;
        double var = 0.0;
        for (const SeedOutcome& o : outcomes) {
            const double d = o.metrics.*field - m;
            var += d * d;
        }
        mean.*field = m;
        stddev.*field = std::sqrt(var / n);
    }
}

json summary_to_json(const ExperimentConfig& cfg, const RunSummary& summary) {
    json per_seed = json::array();
    for (const SeedOutcome& o : summary.per_seed) {
        json row = metrics_to_json(o.metrics);
        row["seed"] = o.seed;
        row["best_epoch"] = o.best_epoch;
        row["epochs_run"] = o.epochs_run;
        per_seed.push_back(std::move(row));
    }
    return json{{"fingerprint", summary.fingerprint},
                {"data_fingerprint", summary.data_fingerprint},
                {"config", json::parse(cfg.to_json_text())},
                {"per_seed", std::move(per_seed)},
                {"mean", metrics_to_json(summary.mean)},
                {"std", metrics_to_json(summary.stddev)},
                {"wall_clock_seconds", summary.wall_seconds}};
}

std::string metric_columns_header() {
    return "mse_mean,mse_std,mae_mean,mae_std,mse_d_mean,mse_d_std,mae_d_mean,mae_d_std,rho_mean,rho_std";
}

std::string metric_columns_row(const RunSummary& s) {
    char buf[400];
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", s.mean.mse,
                  s.stddev.mse, s.mean.mae, s.stddev.mae, s.mean.mse_d, s.stddev.mse_d,
                  s.mean.mae_d, s.stddev.mae_d, s.mean.rho, s.stddev.rho);
    return buf;
}

json summary_table_entry(const RunSummary& s) {
    return json{{"fingerprint", s.fingerprint},
                {"mean", metrics_to_json(s.mean)},
                {"std", metrics_to_json(s.stddev)}};
}

} // namespace

SeriesMatrix build_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset.empty()) {
        std::optional<std::string> date_col;
        if (!cfg.date_column.empty()) {
            date_col = cfg.date_column;
        }
        return load_csv(cfg.dataset, date_col);
    }
    if (cfg.synth_kind == "ar1") {
        return gen_ar1(cfg.synth_phi, cfg.synth_sigma, cfg.synth_T, cfg.synth_N, cfg.synth_seed);
    }
    if (cfg.synth_kind == "sine_mix") {
        return gen_sine_mix(cfg.synth_periods, cfg.synth_amplitudes, cfg.synth_noise_sigma,
                            cfg.synth_T, cfg.synth_N, cfg.synth_seed);
    }
    if (cfg.synth_kind == "random_walk") {
        return gen_random_walk(cfg.synth_sigma, cfg.synth_T, cfg.synth_N, cfg.synth_seed);
    }
    throw std::invalid_argument("config: unknown synth_kind '" + cfg.synth_kind + "'");
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("config: cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("config: top level must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), item.key()) == kKnownKeys.end()) {
            throw std::invalid_argument("config: unknown key '" + item.key() + "'");
        }
    }

    ExperimentConfig cfg;
    read_field(j, "dataset", cfg.dataset);
    read_field(j, "date_column", cfg.date_column);
    read_field(j, "synth_kind", cfg.synth_kind);
    read_field(j, "synth_phi", cfg.synth_phi);
    read_field(j, "synth_sigma", cfg.synth_sigma);
    read_field(j, "synth_noise_sigma", cfg.synth_noise_sigma);
    read_field(j, "synth_periods", cfg.synth_periods);
    read_field(j, "synth_amplitudes", cfg.synth_amplitudes);
    read_field(j, "synth_T", cfg.synth_T);
    read_field(j, "synth_N", cfg.synth_N);
    read_field(j, "synth_seed", cfg.synth_seed);
    read_field(j, "lookback", cfg.lookback);
    read_field(j, "horizon", cfg.horizon);
    read_field(j, "model", cfg.model);
    read_field(j, "kernel", cfg.kernel);
    read_field(j, "loss_base", cfg.loss_base);
    read_field(j, "loss_mode", cfg.loss_mode);
    read_field(j, "alpha", cfg.alpha);
    read_field(j, "diff_order", cfg.diff_order);
    read_field(j, "diff_interval", cfg.diff_interval);
    read_field(j, "split", cfg.split);
    read_field(j, "lr", cfg.lr);
    read_field(j, "beta1", cfg.beta1);
    read_field(j, "beta2", cfg.beta2);
    read_field(j, "adam_eps", cfg.adam_eps);
    read_field(j, "epochs", cfg.epochs);
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "patience", cfg.patience);
    read_field(j, "stride", cfg.stride);
    read_field(j, "shuffle", cfg.shuffle);
    read_field(j, "seeds", cfg.seeds);
    read_field(j, "train_noise_variance", cfg.train_noise_variance);
    read_field(j, "noise_variances", cfg.noise_variances);
    read_field(j, "sweep_orders", cfg.sweep_orders);
    read_field(j, "sweep_intervals", cfg.sweep_intervals);
    read_field(j, "out_dir", cfg.out_dir);
    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::to_json_text() const {
    const json j{{"dataset", dataset},
                 {"date_column", date_column},
                 {"synth_kind", synth_kind},
                 {"synth_phi", synth_phi},
                 {"synth_sigma", synth_sigma},
                 {"synth_noise_sigma", synth_noise_sigma},
                 {"synth_periods", synth_periods},
                 {"synth_amplitudes", synth_amplitudes},
                 {"synth_T", synth_T},
                 {"synth_N", synth_N},
                 {"synth_seed", synth_seed},
                 {"lookback", lookback},
                 {"horizon", horizon},
                 {"model", model},
                 {"kernel", kernel},
                 {"loss_base", loss_base},
                 {"loss_mode", loss_mode},
                 {"alpha", alpha},
                 {"diff_order", diff_order},
                 {"diff_interval", diff_interval},
                 {"split", split},
                 {"lr", lr},
                 {"beta1", beta1},
                 {"beta2", beta2},
                 {"adam_eps", adam_eps},
                 {"epochs", epochs},
                 {"batch_size", batch_size},
                 {"patience", patience},
                 {"stride", stride},
                 {"shuffle", shuffle},
                 {"seeds", seeds},
                 {"train_noise_variance", train_noise_variance},
                 {"noise_variances", noise_variances},
                 {"sweep_orders", sweep_orders},
                 {"sweep_intervals", sweep_intervals},
                 {"out_dir", out_dir}};
    return j.dump(2);
}

std::string ExperimentConfig::fingerprint() const {
    json j = json::parse(to_json_text());
    j.erase("out_dir"); // runs are the same experiment wherever they land
    const std::string canonical = j.dump();
    return to_hex(fnv1a(canonical.data(), canonical.size()));
}

ModelKind ExperimentConfig::model_kind() const {
    if (model == "linear") {
        return ModelKind::Linear;
    }
    if (model == "dlinear") {
        return ModelKind::DLinear;
    }
    throw std::invalid_argument("config: unknown model '" + model + "'");
}

LossConfig ExperimentConfig::loss_config() const {
    LossConfig lc;
    if (loss_base == "mse") {
        lc.base = LossBase::Mse;
    } else if (loss_base == "mae") {
        lc.base = LossBase::Mae;
    } else {
        throw std::invalid_argument("config: unknown loss_base '" + loss_base + "'");
    }

    if (loss_mode == "baseline") {
        lc.mode = LossMode::BaselineOnly;
    } else if (loss_mode == "plus_ld") {
        lc.mode = LossMode::PlusLd;
    } else if (loss_mode == "rho_only") {
        lc.mode = LossMode::RhoOnly;
    } else if (loss_mode == "fixed_alpha") {
        lc.mode = LossMode::FixedAlpha;
    } else if (loss_mode == "learnable_alpha") {
        lc.mode = LossMode::LearnableAlpha;
    } else if (loss_mode == "tdalign") {
        lc.mode = LossMode::TdAlign;
    } else {
        throw std::invalid_argument("config: unknown loss_mode '" + loss_mode + "'");
    }

    lc.alpha = alpha;
    lc.diff.order = diff_order;
    lc.diff.interval = diff_interval;
    return lc;
}

TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
    TrainConfig tc;
    tc.lr = lr;
    tc.beta1 = beta1;
    tc.beta2 = beta2;
    tc.eps = adam_eps;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.patience = patience;
    tc.stride = stride;
    tc.shuffle = shuffle;
    tc.seed = seed;
    tc.loss = loss_config();
    return tc;
}

SplitSpec ExperimentConfig::split_spec() const {
    return SplitSpec{split[0], split[1], split[2]};
}

void ExperimentConfig::validate() const {
    if (dataset.empty() == synth_kind.empty()) {
        throw std::invalid_argument("config: set exactly one of 'dataset' and 'synth_kind'");
    }
    if (!dataset.empty() && !fs::exists(dataset)) {
        throw std::invalid_argument("config: dataset '" + dataset + "' does not exist");
    }
    if (!synth_kind.empty() && synth_kind != "ar1" && synth_kind != "sine_mix" &&
        synth_kind != "random_walk") {
        throw std::invalid_argument("config: unknown synth_kind '" + synth_kind + "'");
    }
    if (lookback < 1 || horizon < 1) {
        throw std::invalid_argument("config: lookback and horizon must be >= 1");
    }
    (void)model_kind();
    if (model_kind() == ModelKind::DLinear &&
        (kernel < 1 || kernel % 2 == 0 || kernel > 2 * lookback - 1)) {
        throw std::invalid_argument("config: kernel must be odd and within [1, 2*lookback-1]");
    }
    (void)loss_config();
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("config: alpha must lie in [0, 1]");
    }
    if (diff_order < 1 || diff_interval < 1) {
        throw std::invalid_argument("config: diff_order and diff_interval must be >= 1");
    }
    if (diff_order * diff_interval > lookback) {
        throw std::invalid_argument("config: diff_order * diff_interval must be <= lookback");
    }
    if (split.size() != 3) {
        throw std::invalid_argument("config: split must have exactly three ratios");
    }
    for (double r : split) {
        if (r <= 0.0) {
            throw std::invalid_argument("config: every split ratio must be positive for training runs");
        }
    }
    if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) {
        throw std::invalid_argument("config: split ratios must sum to 1");
    }
    train_config(0).validate();
    if (seeds.empty()) {
        throw std::invalid_argument("config: seeds must be non-empty");
    }
    if (train_noise_variance < 0.0) {
        throw std::invalid_argument("config: train_noise_variance must be >= 0");
    }
    for (double v : noise_variances) {
        if (v < 0.0) {
            throw std::invalid_argument("config: noise variances must be >= 0");
        }
    }
    for (int o : sweep_orders) {
        if (o < 1) {
            throw std::invalid_argument("config: sweep orders must be >= 1");
        }
    }
    for (int k : sweep_intervals) {
        if (k < 1) {
            throw std::invalid_argument("config: sweep intervals must be >= 1");
        }
    }
    if (synth_T < 1 || synth_N < 1) {
        throw std::invalid_argument("config: synth_T and synth_N must be >= 1");
    }
    if (out_dir.empty()) {
        throw std::invalid_argument("config: out_dir must be non-empty");
    }
}

RunSummary cmd_train(const ExperimentConfig& cfg, bool quiet) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    const PreparedData data = prepare_data(cfg);
    RunSummary summary;
    summary.fingerprint = cfg.fingerprint();
    summary.data_fingerprint = data.data_fingerprint;

    const fs::path run_root = fs::path(cfg.out_dir) / summary.fingerprint;
    fs::create_directories(run_root);

    for (const std::uint64_t seed : cfg.seeds) {
        const fs::path seed_dir = run_root / ("seed" + std::to_string(seed));
        fs::create_directories(seed_dir);

        const SeedRun run = run_seed(cfg, data, seed);
        const std::string note = "config=" + summary.fingerprint + " seed=" + std::to_string(seed);

        run.fit_result.report.to_csv((seed_dir / "report.csv").string(), note);
        save_checkpoint(run.fit_result.params, (seed_dir / "checkpoint.txt").string(), note);

        json metrics = metrics_to_json(run.outcome.metrics);
        metrics["seed"] = seed;
        metrics["fingerprint"] = summary.fingerprint;
        metrics["best_epoch"] = run.outcome.best_epoch;
        metrics["epochs_run"] = run.outcome.epochs_run;
        write_text_file(seed_dir / "metrics.json", metrics.dump(2) + "\n");

        summary.per_seed.push_back(run.outcome);
        if (!quiet) {
            std::printf("[%s] seed %llu: test mse %.6f mae %.6f mse_d %.6f mae_d %.6f rho %.6f (best epoch %d of %d)\n",
                        summary.fingerprint.c_str(), static_cast<unsigned long long>(seed),
                        run.outcome.metrics.mse, run.outcome.metrics.mae, run.outcome.metrics.mse_d,
                        run.outcome.metrics.mae_d, run.outcome.metrics.rho, run.outcome.best_epoch,
                        run.outcome.epochs_run);
        }
    }

    accumulate_mean_std(summary.per_seed, summary.mean, summary.stddev);
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    write_text_file(run_root / "summary.json", summary_to_json(cfg, summary).dump(2) + "\n");
    if (!quiet) {
        std::printf("[%s] mean test mse %.6f (std %.6f) over %zu seeds, %.1fs\n",
                    summary.fingerprint.c_str(), summary.mean.mse, summary.stddev.mse,
                    summary.per_seed.size(), summary.wall_seconds);
    }
    return summary;
}

std::vector<std::pair<std::string, RunSummary>> cmd_ablate(const ExperimentConfig& cfg, bool quiet) {
    cfg.validate();
    static const std::array<const char*, 5> kModes = {"baseline", "plus_ld", "rho_only",
                                                      "learnable_alpha", "tdalign"};

    std::vector<std::pair<std::string, RunSummary>> table;
    for (const char* mode : kModes) {
        ExperimentConfig sub = cfg;
        sub.loss_mode = mode;
        if (!quiet) {
            std::printf("== mode %s ==\n", mode);
        }
        table.emplace_back(mode, cmd_train(sub, quiet));
    }

    for (const auto& [mode, summary] : table) {
        if (summary.data_fingerprint != table.front().second.data_fingerprint) {
            throw std::runtime_error("cmd_ablate: windowed data fingerprint diverged for mode '" +
                                     mode + "'");
        }
    }

    const std::string base_fp = cfg.fingerprint();
    std::ostringstream csv;
    csv << "# config=" << base_fp << "\n";
    csv << "mode,fingerprint," << metric_columns_header() << "\n";
    json jtable = json::array();
    for (const auto& [mode, summary] : table) {
        csv << mode << ',' << summary.fingerprint << ',' << metric_columns_row(summary) << "\n";
        json entry = summary_table_entry(summary);
        entry["mode"] = mode;
        entry["data_fingerprint"] = summary.data_fingerprint;
        jtable.push_back(std::move(entry));
    }

    fs::create_directories(cfg.out_dir);
    write_text_file(fs::path(cfg.out_dir) / ("ablation_" + base_fp + ".csv"), csv.str());
    write_text_file(fs::path(cfg.out_dir) / ("ablation_" + base_fp + ".json"),
                    json{{"fingerprint", base_fp}, {"rows", std::move(jtable)}}.dump(2) + "\n");
    return table;
}

std::vector<std::pair<DiffSpec, RunSummary>> cmd_sweep_diffspec(const ExperimentConfig& cfg,
                                                                const std::vector<int>& orders,
                                                                const std::vector<int>& intervals,
                                                                bool quiet) {
    cfg.validate();
    if (orders.empty() || intervals.empty()) {
        throw std::invalid_argument("sweep-diff: need at least one order and one interval");
    }
    for (const int o : orders) {
        for (const int k : intervals) {
            if (o < 1 || k < 1 || o * k > cfg.lookback) {
                throw std::invalid_argument("sweep-diff: order " + std::to_string(o) + " interval " +
                                            std::to_string(k) + " needs " + std::to_string(o * k) +
                                            " context rows but lookback is " +
                                            std::to_string(cfg.lookback));
            }
        }
    }

    std::vector<std::pair<DiffSpec, RunSummary>> table;
    for (const int o : orders) {
        for (const int k : intervals) {
            ExperimentConfig sub = cfg;
            sub.loss_mode = "tdalign";
            sub.diff_order = o;
            sub.diff_interval = k;
            if (!quiet) {
                std::printf("== diff order %d interval %d ==\n", o, k);
            }
            table.emplace_back(DiffSpec{o, k}, cmd_train(sub, quiet));
        }
    }

    const std::string base_fp = cfg.fingerprint();
    std::ostringstream csv;
    csv << "# config=" << base_fp << "\n";
    csv << "order,interval,fingerprint," << metric_columns_header() << "\n";
    json jtable = json::array();
    for (const auto& [spec, summary] : table) {
        csv << spec.order << ',' << spec.interval << ',' << summary.fingerprint << ','
            << metric_columns_row(summary) << "\n";
        json entry = summary_table_entry(summary);
        entry["order"] = spec.order;
        entry["interval"] = spec.interval;
        jtable.push_back(std::move(entry));
    }

    fs::create_directories(cfg.out_dir);
    write_text_file(fs::path(cfg.out_dir) / ("sweep_diff_" + base_fp + ".csv"), csv.str());
    write_text_file(fs::path(cfg.out_dir) / ("sweep_diff_" + base_fp + ".json"),
                    json{{"fingerprint", base_fp}, {"rows", std::move(jtable)}}.dump(2) + "\n");
    return table;
}

std::vector<NoiseSweepRow> cmd_sweep_noise(const ExperimentConfig& cfg,
                                           const std::vector<double>& variances, bool quiet) {
    cfg.validate();
    if (variances.empty()) {
        throw std::invalid_argument("sweep-noise: need at least one variance");
    }
    for (const double v : variances) {
        if (v < 0.0) {
            throw std::invalid_argument("sweep-noise: negative variance");
        }
    }

    std::vector<NoiseSweepRow> rows;
    for (const double v : variances) {
        for (const char* mode : {"baseline", "tdalign"}) {
            ExperimentConfig sub = cfg;
            sub.train_noise_variance = v;
            sub.loss_mode = mode;
            if (!quiet) {
                std::printf("== noise variance %g, mode %s ==\n", v, mode);
            }
            rows.push_back(NoiseSweepRow{v, mode, cmd_train(sub, quiet)});
        }
    }

    const std::string base_fp = cfg.fingerprint();
    std::ostringstream csv;
    csv << "# config=" << base_fp << "\n";
    csv << "variance,mode,fingerprint," << metric_columns_header() << "\n";
    json jtable = json::array();
    for (const NoiseSweepRow& row : rows) {
        char head[96];
        std::snprintf(head, sizeof(head), "%.17g,%s,", row.variance, row.mode.c_str());
        csv << head << row.summary.fingerprint << ',' << metric_columns_row(row.summary) << "\n";
        json entry = summary_table_entry(row.summary);
        entry["variance"] = row.variance;
        entry["mode"] = row.mode;
        jtable.push_back(std::move(entry));
    }

    fs::create_directories(cfg.out_dir);
    write_text_file(fs::path(cfg.out_dir) / ("sweep_noise_" + base_fp + ".csv"), csv.str());
    write_text_file(fs::path(cfg.out_dir) / ("sweep_noise_" + base_fp + ".json"),
                    json{{"fingerprint", base_fp}, {"rows", std::move(jtable)}}.dump(2) + "\n");
    return rows;
}

namespace {

struct TheoryCheck {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

} // namespace

bool cmd_verify_theory(const std::string& out_path, std::uint64_t seed, bool quiet) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phi_dist(-0.99, 0.99);
    std::uniform_int_distribution<int> h_dist(2, 64);
    std::vector<TheoryCheck> checks;

    {
        double max_err = 0.0;
        for (int inst = 0; inst < 1000; ++inst) {
            const int H = h_dist(rng);
            std::vector<double> eps(static_cast<std::size_t>(H));
            std::vector<double> phi(static_cast<std::size_t>(H - 1));
            for (double& e : eps) {
                e = normal(rng);
            }
            for (double& p : phi) {
                p = phi_dist(rng);
            }
            long double sum_sq = 0.0L;
            for (const double e : eps) {
                sum_sq += static_cast<long double>(e) * e;
            }
            const double gap = static_cast<double>(
                markov_nll_core(eps, phi) - sum_sq - discrepancy_psi(eps, phi));
            max_err = std::max(max_err, std::abs(gap));
        }
        checks.push_back({"nll-gap-identity", max_err, 1e-12, max_err <= 1e-12,
                          "1000 random error/pacf instances, H in [2, 64]"});
    }

    {
        double max_abs = 0.0;
        for (int inst = 0; inst < 100; ++inst) {
            const int H = h_dist(rng);
            std::vector<double> eps(static_cast<std::size_t>(H));
            const std::vector<double> phi(static_cast<std::size_t>(H - 1), 0.0);
            for (double& e : eps) {
                e = normal(rng);
            }
            max_abs = std::max(max_abs, std::abs(discrepancy_psi(eps, phi)));
        }
        checks.push_back({"gap-zero-at-zero-pacf", max_abs, 0.0, max_abs == 0.0,
                          "uncorrelated errors make the gap vanish exactly"});
    }

    {
        double max_err = 0.0;
        std::uniform_int_distribution<int> b_dist(1, 4);
        std::uniform_int_distribution<int> n_dist(1, 3);
        for (int inst = 0; inst < 1000; ++inst) {
            const int B = b_dist(rng);
            const int H = h_dist(rng);
            const int N = n_dist(rng);
            Tensor3 y(B, H, N);
            Tensor3 yhat(B, H, N);
            Tensor3 context(B, 1, N);
            for (double& v : y.data) {
                v = normal(rng);
            }
            for (double& v : yhat.data) {
                v = normal(rng);
            }
            for (double& v : context.data) {
                v = normal(rng);
            }
            const DiffSpec first{1, 1};
            const double direct = tdt_loss(tdt(y, context, first), tdp(yhat, context, first),
                                           LossBase::Mse);
            double telescoped = 0.0;
            for (int b = 0; b < B; ++b) {
                for (int n = 0; n < N; ++n) {
                    double prev_err = 0.0; // the shared anchor cancels in the first step
                    for (int i = 0; i < H; ++i) {
                        const double err = y.at(b, i, n) - yhat.at(b, i, n);
                        const double step = err - prev_err;
                        telescoped += step * step;
                        prev_err = err;
                    }
                }
            }
            telescoped /= static_cast<double>(y.size());
            max_err = std::max(max_err, std::abs(direct - telescoped));
        }
        checks.push_back({"difference-loss-telescoping", max_err, 1e-12, max_err <= 1e-12,
                          "difference MSE equals the error-increment form"});
    }

    {
        const double err0 = std::abs(std_normal_cdf(0.0) - 0.5);
        const double err196 = std::abs(std_normal_cdf(1.96) - 0.9750021048517795);
        const double sym = std::abs(std_normal_cdf(-1.3) + std_normal_cdf(1.3) - 1.0);
        const double max_err = std::max({err0, err196, sym});
        checks.push_back({"normal-cdf-reference", max_err, 1e-9, max_err <= 1e-9,
                          "Phi(0), Phi(1.96), symmetry"});
    }

    {
        bool monotone = true;
        const std::vector<double> d = {0.4, -1.2, 2.5, 0.05};
        double prev = 0.0;
        for (const double sigma : {0.1, 0.3, 1.0, 3.0, 10.0}) {
            const double r = expected_rho(d, sigma);
            if (r < prev - 1e-15) {
                monotone = false;
            }
            prev = r;
        }
        checks.push_back({"expected-rho-monotone-in-noise", monotone ? 0.0 : 1.0, 0.0, monotone,
                          "rho expectation grows with the error scale"});
    }

    {
        const std::int64_t trials = 200000;
        double max_err = 0.0;
        const double tol = 3.0 * std::sqrt(0.25 / (static_cast<double>(trials) * 16.0));
        std::uniform_real_distribution<double> d_dist(-2.0, 2.0);
        std::uniform_real_distribution<double> sigma_dist(0.2, 2.0);
        for (int inst = 0; inst < 10; ++inst) {
            std::vector<double> d(16);
            for (double& v : d) {
                v = d_dist(rng);
            }
            const double sigma = sigma_dist(rng);
            const double closed = expected_rho(d, sigma);
            const double sampled = monte_carlo_rho(d, sigma, trials, mix_seed(seed, 100 + inst));
            max_err = std::max(max_err, std::abs(closed - sampled));
        }
        checks.push_back({"monte-carlo-rho", max_err, tol, max_err <= tol,
                          "10 instances, H=16, 200k trials each"});
    }

    bool all_pass = true;
    std::ostringstream report;
    report << "theory checks, seed " << seed << "\n";
    for (const TheoryCheck& c : checks) {
        all_pass = all_pass && c.pass;
        char line[256];
        std::snprintf(line, sizeof(line), "%-32s measured %.3e  tolerance %.3e  %s  (%s)\n",
                      c.name.c_str(), c.measured, c.tolerance, c.pass ? "PASS" : "FAIL",
                      c.detail.c_str());
        report << line;
    }
    report << (all_pass ? "overall PASS\n" : "overall FAIL\n");

    if (!out_path.empty()) {
        const fs::path p(out_path);
        if (p.has_parent_path()) {
            fs::create_directories(p.parent_path());
        }
        write_text_file(p, report.str());
    }
    if (!quiet) {
        std::fputs(report.str().c_str(), stdout);
    }
    return all_pass;
}

namespace {

struct ParsedReport {
    std::string fingerprint;
    long long seed = -1;
    std::vector<std::array<double, 9>> rows; // epoch + 8 metric columns
};

constexpr std::array<const char*, 8> kReportMetrics = {
    "train_ly", "train_ld", "train_rho", "train_total", "val_mse", "val_mse_d", "val_rho",
    "seconds"};

ParsedReport parse_report_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cmd_report: cannot open '" + path.string() + "'");
    }

    ParsedReport parsed;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            char fp[64];
            long long seed = -1;
            if (std::sscanf(line.c_str(), "# config=%63s seed=%lld", fp, &seed) == 2) {
                parsed.fingerprint = fp;
                parsed.seed = seed;
            }
            continue;
        }
        if (!header_seen) {
            if (line != "epoch,train_ly,train_ld,train_rho,train_total,val_mse,val_mse_d,val_rho,seconds") {
                throw std::invalid_argument("cmd_report: unexpected header in '" + path.string() + "'");
            }
            header_seen = true;
            continue;
        }
        std::array<double, 9> row{};
        const int got = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &row[0],
                                    &row[1], &row[2], &row[3], &row[4], &row[5], &row[6], &row[7],
                                    &row[8]);
        if (got != 9) {
            throw std::invalid_argument("cmd_report: malformed row in '" + path.string() + "'");
        }
        parsed.rows.push_back(row);
    }
    if (!header_seen || parsed.rows.empty()) {
        throw std::invalid_argument("cmd_report: '" + path.string() + "' holds no epochs");
    }
    if (parsed.fingerprint.empty()) {
        throw std::invalid_argument("cmd_report: '" + path.string() + "' is missing its config fingerprint line");
    }
    return parsed;
}

const std::array<const char*, 8> kChartPalette = {"#1f6f8b", "#d1495b", "#3b8c5a", "#e4a010",
                                                  "#7262ac", "#50514f", "#9a3b64", "#2a7f8f"};

void write_line_chart(const fs::path& path, const std::string& title,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const int width = 760;
    const int height = 440;
    const int left = 64;
    const int right = 20;
    const int top = 48;
    const int bottom = 40;

    double lo = 0.0;
    double hi = 1.0;
    std::size_t max_len = 2;
    bool first = true;
    for (const auto& [label, ys] : series) {
        for (const double y : ys) {
            if (first) {
                lo = hi = y;
                first = false;
            } else {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
        }
        max_len = std::max(max_len, ys.size());
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const auto sx = [&](std::size_t i) {
        return left + plot_w * (max_len > 1 ? static_cast<double>(i) / (max_len - 1) : 0.0);
    };
    const auto sy = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
        << title << "</text>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << (top + plot_h) << "\" stroke=\"#333\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << (top + plot_h) << "\" x2=\"" << (left + plot_w)
        << "\" y2=\"" << (top + plot_h) << "\" stroke=\"#333\"/>\n";

    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        const double y = sy(v);
        char label[48];
        std::snprintf(label, sizeof(label), "%.4g", v);
        svg << "<line x1=\"" << (left - 4) << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\""
            << y << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << (left - 8) << "\" y=\"" << (y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << label
            << "</text>\n";
    }
    svg << "<text x=\"" << (left + plot_w / 2) << "\" y=\"" << (height - 8)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";

    std::size_t color = 0;
    double legend_y = 24;
    for (const auto& [label, ys] : series) {
        const char* stroke = kChartPalette[color % kChartPalette.size()];
        svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            svg << (i ? " " : "") << sx(i) << ',' << sy(ys[i]);
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << (width - right) << "\" y=\"" << legend_y
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\" fill=\"" << stroke
            << "\">" << label << "</text>\n";
        legend_y += 14;
        ++color;
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

} // namespace

void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) {
        throw std::invalid_argument("cmd_report: no run directories given");
    }

    std::vector<fs::path> files;
    for (const std::string& dir : run_dirs) {
        const fs::path p(dir);
        if (!fs::exists(p)) {
            throw std::invalid_argument("cmd_report: '" + dir + "' does not exist");
        }
        if (fs::is_regular_file(p)) {
            files.push_back(p);
            continue;
        }
        for (const auto& entry : fs::recursive_directory_iterator(p)) {
            if (entry.is_regular_file() && entry.path().filename() == "report.csv") {
                files.push_back(entry.path());
            }
        }
    }
    if (files.empty()) {
        throw std::invalid_argument("cmd_report: no report.csv found under the given directories");
    }
    std::sort(files.begin(), files.end());

    std::vector<ParsedReport> reports;
    reports.reserve(files.size());
    for (const fs::path& f : files) {
        reports.push_back(parse_report_csv(f));
    }

    fs::create_directories(out_dir);
    std::ostringstream tidy;
    tidy << "fingerprint,seed,epoch,metric,value\n";
    char buf[160];
    for (const ParsedReport& r : reports) {
        for (const auto& row : r.rows) {
            for (std::size_t m = 0; m < kReportMetrics.size(); ++m) {
                std::snprintf(buf, sizeof(buf), "%s,%lld,%d,%s,%.17g\n", r.fingerprint.c_str(),
                              r.seed, static_cast<int>(row[0]), kReportMetrics[m], row[m + 1]);
                tidy << buf;
            }
        }
    }
    write_text_file(fs::path(out_dir) / "tidy.csv", tidy.str());

    std::vector<std::pair<std::string, std::vector<double>>> val_mse_series;
    std::vector<std::pair<std::string, std::vector<double>>> train_total_series;
    for (const ParsedReport& r : reports) {
        std::vector<double> val_mse;
        std::vector<double> train_total;
        for (const auto& row : r.rows) {
            train_total.push_back(row[4]);
            val_mse.push_back(row[5]);
        }
        const std::string label = r.fingerprint.substr(0, 8) + ":" + std::to_string(r.seed);
        val_mse_series.emplace_back(label, std::move(val_mse));
        train_total_series.emplace_back(label, std::move(train_total));
    }
    write_line_chart(fs::path(out_dir) / "val_mse.svg", "validation MSE by epoch", val_mse_series);
    write_line_chart(fs::path(out_dir) / "train_total.svg", "training loss by epoch",
                     train_total_series);
}

std::string cmd_synth(const ExperimentConfig& cfg, const std::string& out_path) {
    if (cfg.synth_kind.empty()) {
        throw std::invalid_argument("cmd_synth: config must describe a synthetic dataset");
    }
    const SeriesMatrix data = build_dataset(cfg);
    const std::string fp = cfg.fingerprint();

    fs::path target(out_path.empty() ? cfg.out_dir : out_path);
    if (target.extension() != ".csv") {
        fs::create_directories(target);
        target /= "synth_" + cfg.synth_kind + "_" + fp + ".csv";
    } else if (target.has_parent_path()) {
        fs::create_directories(target.parent_path());
    }

    write_csv(data, target.string());
    const json meta{{"fingerprint", fp},
                    {"rows", data.rows()},
                    {"columns", data.cols()},
                    {"config", json::parse(cfg.to_json_text())}};
    write_text_file(target.string() + ".meta.json", meta.dump(2) + "\n");
    return target.string();
}

} // namespace tdalign
