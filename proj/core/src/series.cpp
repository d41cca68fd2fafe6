#include "tdalign/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tdalign {

namespace {

constexpr double kStdFloor = 1e-8;
constexpr double kRatioGuard = 1e-9; // guards floor() against representation error

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse_cell(const std::string& cell, int row, const std::string& col_name) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;

    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last || !std::isfinite(value)) {
        throw std::invalid_argument("load_csv: non-numeric value '" + cell + "' at data row " +
                                    std::to_string(row + 1) + ", column '" + col_name + "'");
    }
    return value;
}

} // namespace

SeriesMatrix SeriesMatrix::slice_rows(int first, int last) const {
    if (first < 0 || last < first || last > rows()) {
        throw std::invalid_argument("SeriesMatrix::slice_rows: range out of bounds");
    }
    SeriesMatrix out;
    out.names = names;
    out.granularity = granularity;
    out.values = Matrix(last - first, cols());
    std::copy(values.row(first), values.row(first) + static_cast<std::size_t>(last - first) * cols(),
              out.values.data.begin());
    return out;
}

SeriesMatrix load_csv(const std::string& path, const std::optional<std::string>& date_column) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("load_csv: cannot open '" + path + "'");
    }

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.size() < 2) {
        throw std::invalid_argument("load_csv: '" + path + "' needs a header row and at least one data row");
    }

    std::vector<std::string> header = split_line(lines[0]);
    if (header.empty()) {
        throw std::invalid_argument("load_csv: '" + path + "' has an empty header row");
    }

    int date_idx = -1;
    if (date_column) {
        auto it = std::find(header.begin(), header.end(), *date_column);
        if (it == header.end()) {
            throw std::invalid_argument("load_csv: date column '" + *date_column + "' not found in '" + path + "'");
        }
        date_idx = static_cast<int>(it - header.begin());
    } else if (header[0] == "date") {
        date_idx = 0;
    }

    std::vector<std::string> names;
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
        if (j != date_idx) {
            names.push_back(header[j]);
        }
    }
    if (names.empty()) {
        throw std::invalid_argument("load_csv: '" + path + "' has no value columns");
    }

    const int T = static_cast<int>(lines.size()) - 1;
    const int N = static_cast<int>(names.size());
    SeriesMatrix out;
    out.names = names;
    out.values = Matrix(T, N);

    for (int t = 0; t < T; ++t) {
        std::vector<std::string> cells = split_line(lines[t + 1]);
        if (static_cast<int>(cells.size()) != static_cast<int>(header.size())) {
            throw std::invalid_argument("load_csv: data row " + std::to_string(t + 1) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        }
        int j_out = 0;
        for (int j = 0; j < static_cast<int>(cells.size()); ++j) {
            if (j == date_idx) {
                continue;
            }
            out.values.at(t, j_out) = parse_cell(cells[j], t, names[j_out]);
            ++j_out;
        }
    }
    return out;
}

void write_csv(const SeriesMatrix& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("write_csv: cannot open '" + path + "' for writing");
    }
    for (int j = 0; j < s.cols(); ++j) {
        out << (j ? "," : "") << (j < static_cast<int>(s.names.size()) ? s.names[j] : "v" + std::to_string(j));
    }
    out << '\n';
    char buf[64];
    for (int t = 0; t < s.rows(); ++t) {
        for (int j = 0; j < s.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", s.at(t, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("write_csv: write to '" + path + "' failed");
    }
}

SplitResult chronological_split(const SeriesMatrix& s, const SplitSpec& spec, int lookback) {
    if (s.rows() < 1) {
        throw std::invalid_argument("chronological_split: empty series");
    }
    if (lookback < 1) {
        throw std::invalid_argument("chronological_split: lookback must be >= 1");
    }
    if (spec.train < 0 || spec.val < 0 || spec.test < 0) {
        throw std::invalid_argument("chronological_split: negative ratio");
    }
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
        throw std::invalid_argument("chronological_split: ratios must sum to 1");
    }

    const int T = s.rows();
    int train_n = static_cast<int>(std::floor(spec.train * T + kRatioGuard));
    int val_n = spec.val > 0 ? static_cast<int>(std::floor(spec.val * T + kRatioGuard)) : 0;
    int test_n = spec.test > 0 ? static_cast<int>(std::floor(spec.test * T + kRatioGuard)) : 0;

    // The last nonzero-ratio split absorbs the rounding remainder so the
    // target regions tile [0, T) exactly.
    if (spec.test > 0) {
        test_n = T - train_n - val_n;
    } else if (spec.val > 0) {
        val_n = T - train_n;
    } else {
        train_n = T;
    }

    if (spec.train > 0 && train_n < 1) {
        throw std::invalid_argument("chronological_split: train split is empty");
    }
    if (spec.val > 0 && val_n < 1) {
        throw std::invalid_argument("chronological_split: val split is empty");
    }
    if (spec.test > 0 && test_n < 1) {
        throw std::invalid_argument("chronological_split: test split is empty");
    }

    const int t1 = train_n;
    const int t2 = train_n + val_n;

    SplitResult out;
    out.train_targets = train_n;
    out.val_targets = val_n;
    out.test_targets = test_n;
    out.train = s.slice_rows(0, t1);

    if (val_n > 0) {
        if (t1 < lookback) {
            throw std::invalid_argument("chronological_split: lookback exceeds the rows preceding the val split");
        }
        out.val = s.slice_rows(t1 - lookback, t2);
    }
    if (test_n > 0) {
        if (t2 < lookback) {
            throw std::invalid_argument("chronological_split: lookback exceeds the rows preceding the test split");
        }
        out.test = s.slice_rows(t2 - lookback, T);
    }
    out.val.names = s.names;
    out.test.names = s.names;
    out.val.granularity = s.granularity;
    out.test.granularity = s.granularity;
    return out;
}

ZScoreScaler fit_scaler(const SeriesMatrix& train) {
    if (train.rows() < 2) {
        throw std::invalid_argument("fit_scaler: need at least 2 rows");
    }
    const int T = train.rows();
    const int N = train.cols();
    ZScoreScaler sc;
    sc.mean.assign(N, 0.0);
    sc.std.assign(N, 0.0);
    for (int j = 0; j < N; ++j) {
        double m = 0.0;
        for (int t = 0; t < T; ++t) {
            m += train.at(t, j);
        }
        m /= T;
        double var = 0.0;
        for (int t = 0; t < T; ++t) {
            const double d = train.at(t, j) - m;
            var += d * d;
        }
        var /= T;
        sc.mean[j] = m;
        sc.std[j] = std::max(std::sqrt(var), kStdFloor);
    }
    return sc;
}

SeriesMatrix ZScoreScaler::transform(const SeriesMatrix& s) const {
    if (s.cols() != static_cast<int>(mean.size())) {
        throw std::invalid_argument("ZScoreScaler::transform: column count mismatch");
    }
    SeriesMatrix out = s;
    for (int t = 0; t < s.rows(); ++t) {
        for (int j = 0; j < s.cols(); ++j) {
            out.at(t, j) = (s.at(t, j) - mean[j]) / std[j];
        }
    }
    return out;
}

SeriesMatrix ZScoreScaler::inverse(const SeriesMatrix& s) const {
    if (s.cols() != static_cast<int>(mean.size())) {
        throw std::invalid_argument("ZScoreScaler::inverse: column count mismatch");
    }
    SeriesMatrix out = s;
    for (int t = 0; t < s.rows(); ++t) {
        for (int j = 0; j < s.cols(); ++j) {
            out.at(t, j) = s.at(t, j) * std[j] + mean[j];
        }
    }
    return out;
}

WindowLayout make_windows(const SeriesMatrix& s, int lookback, int horizon, int stride) {
    if (lookback < 1 || horizon < 1) {
        throw std::invalid_argument("make_windows: lookback and horizon must be >= 1");
    }
    if (stride < 1) {
        throw std::invalid_argument("make_windows: stride must be >= 1");
    }
    WindowLayout layout;
    layout.lookback = lookback;
    layout.horizon = horizon;
    layout.stride = stride;
    const int T = s.rows();
    if (T >= lookback + horizon) {
        const int count = (T - lookback - horizon) / stride + 1;
        layout.starts.reserve(count);
        for (int w = 0; w < count; ++w) {
            layout.starts.push_back(w * stride);
        }
    }
    return layout;
}

WindowBatch gather_windows(const SeriesMatrix& s, const WindowLayout& layout,
                           const std::vector<int>& which) {
    const int B = static_cast<int>(which.size());
    const int L = layout.lookback;
    const int H = layout.horizon;
    const int N = s.cols();

    WindowBatch batch;
    batch.inputs = Tensor3(B, L, N);
    batch.anchor = Matrix(B, N);
    batch.targets = Tensor3(B, H, N);

    for (int b = 0; b < B; ++b) {
        const int idx = which[b];
        if (idx < 0 || idx >= layout.count()) {
            throw std::invalid_argument("gather_windows: window index out of range");
        }
        const int start = layout.starts[idx];
        if (start + L + H > s.rows()) {
            throw std::invalid_argument("gather_windows: window exceeds series length");
        }
        for (int i = 0; i < L; ++i) {
            const double* src = s.values.row(start + i);
            double* dst = &batch.inputs.at(b, i, 0);
            std::copy(src, src + N, dst);
        }
        const double* anchor_src = s.values.row(start + L - 1);
        std::copy(anchor_src, anchor_src + N, batch.anchor.row(b));
        for (int i = 0; i < H; ++i) {
            const double* src = s.values.row(start + L + i);
            double* dst = &batch.targets.at(b, i, 0);
            std::copy(src, src + N, dst);
        }
    }
    return batch;
}

WindowBatch gather_all_windows(const SeriesMatrix& s, const WindowLayout& layout) {
    std::vector<int> which(layout.count());
    for (int w = 0; w < layout.count(); ++w) {
        which[w] = w;
    }
    return gather_windows(s, layout, which);
}

Tensor3 WindowBatch::input_tail(int rows) const {
    if (rows < 1 || rows > inputs.steps) {
        throw std::invalid_argument("WindowBatch::input_tail: requested more context rows than the lookback holds");
    }
    Tensor3 tail(inputs.batch, rows, inputs.vars);
    const int off = inputs.steps - rows;
    for (int b = 0; b < inputs.batch; ++b) {
        for (int i = 0; i < rows; ++i) {
            for (int n = 0; n < inputs.vars; ++n) {
                tail.at(b, i, n) = inputs.at(b, off + i, n);
            }
        }
    }
    return tail;
}

SeriesMatrix inject_gaussian_noise(const SeriesMatrix& s, double variance, std::uint64_t seed) {
    if (variance < 0) {
        throw std::invalid_argument("inject_gaussian_noise: negative variance");
    }
    SeriesMatrix out = s;
    if (variance == 0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(variance));
    for (double& v : out.values.data) {
        v += noise(rng);
    }
    return out;
}

namespace {

SeriesMatrix make_synthetic(int T, int N, const std::string& granularity) {
    if (T < 1 || N < 1) {
        throw std::invalid_argument("synthetic generator: T and N must be >= 1");
    }
    SeriesMatrix out;
    out.values = Matrix(T, N);
    out.granularity = granularity;
    out.names.reserve(N);
    for (int j = 0; j < N; ++j) {
        out.names.push_back("v" + std::to_string(j));
    }
    return out;
}

} // namespace

SeriesMatrix gen_ar1(double phi, double sigma, int T, int N, std::uint64_t seed) {
    if (std::abs(phi) >= 1.0) {
        throw std::invalid_argument("gen_ar1: |phi| must be < 1 for a stationary process");
    }
    if (sigma < 0) {
        throw std::invalid_argument("gen_ar1: negative sigma");
    }
    SeriesMatrix out = make_synthetic(T, N, "synthetic-ar1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> prev(N, 0.0);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < N; ++j) {
            const double x = phi * prev[j] + noise(rng);
            out.at(t, j) = x;
            prev[j] = x;
        }
    }
    return out;
}

SeriesMatrix gen_sine_mix(const std::vector<double>& periods,
                          const std::vector<double>& amplitudes,
                          double noise_sigma, int T, int N, std::uint64_t seed) {
    if (periods.empty() || periods.size() != amplitudes.size()) {
        throw std::invalid_argument("gen_sine_mix: periods and amplitudes must be non-empty and equally sized");
    }
    for (double p : periods) {
        if (p <= 0) {
            throw std::invalid_argument("gen_sine_mix: periods must be positive");
        }
    }
    if (noise_sigma < 0) {
        throw std::invalid_argument("gen_sine_mix: negative noise sigma");
    }

    SeriesMatrix out = make_synthetic(T, N, "synthetic-sine");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
    std::normal_distribution<double> noise(0.0, noise_sigma);

    const int K = static_cast<int>(periods.size());
    std::vector<double> phases(static_cast<std::size_t>(N) * K);
    for (double& p : phases) {
        p = phase(rng);
    }
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < N; ++j) {
            double x = 0.0;
            for (int k = 0; k < K; ++k) {
                x += amplitudes[k] *
                     std::sin(2.0 * 3.14159265358979323846 * t / periods[k] + phases[static_cast<std::size_t>(j) * K + k]);
            }
            if (noise_sigma > 0) {
                x += noise(rng);
            }
            out.at(t, j) = x;
        }
    }
    return out;
}

SeriesMatrix gen_random_walk(double sigma, int T, int N, std::uint64_t seed) {
    if (sigma < 0) {
        throw std::invalid_argument("gen_random_walk: negative sigma");
    }
    SeriesMatrix out = make_synthetic(T, N, "synthetic-walk");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> prev(N, 0.0);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < N; ++j) {
            const double x = prev[j] + noise(rng);
            out.at(t, j) = x;
            prev[j] = x;
        }
    }
    return out;
}

} // namespace tdalign
