#include "tdalign/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tdalign {

namespace {

void check_inputs(const ForecasterParams& params, const Tensor3& inputs) {
    if (inputs.steps != params.lookback) {
        throw std::invalid_argument("forecaster: input window length disagrees with lookback");
    }
    if (inputs.batch < 1 || inputs.vars < 1) {
        throw std::invalid_argument("forecaster: empty input batch");
    }
}

void check_params(const ForecasterParams& params) {
    const std::size_t blocks = params.kind == ModelKind::Linear ? 1 : 2;
    if (params.weights.size() != blocks || params.biases.size() != blocks) {
        throw std::invalid_argument("forecaster: parameter block count disagrees with model kind");
    }
    for (const Matrix& w : params.weights) {
        if (w.n_rows != params.horizon || w.n_cols != params.lookback) {
            throw std::invalid_argument("forecaster: weight shape disagrees with lookback/horizon");
        }
    }
    for (const auto& b : params.biases) {
        if (static_cast<int>(b.size()) != params.horizon) {
            throw std::invalid_argument("forecaster: bias length disagrees with horizon");
        }
    }
}

void check_kernel(int kernel, int lookback) {
    if (kernel < 1 || kernel % 2 == 0 || kernel > 2 * lookback - 1) {
        throw std::invalid_argument("moving_average_decompose: kernel must be odd and within [1, 2L-1]");
    }
}

/** Channel-major copy: (B*N) x L rows from a B x L x N tensor. */
Matrix to_channel_rows(const Tensor3& x) {
    Matrix out(x.batch * x.vars, x.steps);
    for (int b = 0; b < x.batch; ++b) {
        for (int n = 0; n < x.vars; ++n) {
            double* dst = out.row(b * x.vars + n);
            for (int i = 0; i < x.steps; ++i) {
                dst[i] = x.at(b, i, n);
            }
        }
    }
    return out;
}

/** out[r, :] += rows[r] * W^T + bias, computed via an explicit W transpose. */
void apply_linear(const Matrix& x, const Matrix& w, const std::vector<double>& bias, Matrix& out) {
    const int R = x.n_rows;
    const int L = x.n_cols;
    const int H = w.n_rows;

    Matrix wt(L, H);
    for (int h = 0; h < H; ++h) {
        const double* wrow = w.row(h);
        for (int l = 0; l < L; ++l) {
            wt.at(l, h) = wrow[l];
        }
    }

    for (int r = 0; r < R; ++r) {
        const double* xrow = x.row(r);
        double* orow = out.row(r);
        for (int h = 0; h < H; ++h) {
            orow[h] += bias[h];
        }
        for (int l = 0; l < L; ++l) {
            const double xv = xrow[l];
            const double* wtrow = wt.row(l);
            for (int h = 0; h < H; ++h) {
                orow[h] += xv * wtrow[h];
            }
        }
    }
}

/** acc += U^T * X where U is R x H and X is R x L. */
void accumulate_outer(const Matrix& u, const Matrix& x, Matrix& acc) {
    const int R = u.n_rows;
    const int H = u.n_cols;
    const int L = x.n_cols;
    for (int r = 0; r < R; ++r) {
        const double* urow = u.row(r);
        const double* xrow = x.row(r);
        for (int h = 0; h < H; ++h) {
            const double uv = urow[h];
            double* arow = acc.row(h);
            for (int l = 0; l < L; ++l) {
                arow[l] += uv * xrow[l];
            }
        }
    }
}

Tensor3 from_channel_rows(const Matrix& rows, int batch, int steps, int vars) {
    Tensor3 out(batch, steps, vars);
    for (int b = 0; b < batch; ++b) {
        for (int n = 0; n < vars; ++n) {
            const double* src = rows.row(b * vars + n);
            for (int i = 0; i < steps; ++i) {
                out.at(b, i, n) = src[i];
            }
        }
    }
    return out;
}

} // namespace

void moving_average_decompose(const Tensor3& x, int kernel, Tensor3& trend, Tensor3& seasonal) {
    check_kernel(kernel, x.steps);
    const int B = x.batch;
    const int L = x.steps;
    const int N = x.vars;
    const int pad = (kernel - 1) / 2;

    trend = Tensor3(B, L, N);
    seasonal = Tensor3(B, L, N);

    if (kernel == 1) {
        // degenerate window: skip the prefix sums so the trend is the input
        // itself rather than the input plus running-sum roundoff
        trend.data = x.data;
        return;
    }

    std::vector<double> prefix(static_cast<std::size_t>(L) + 1);
    for (int b = 0; b < B; ++b) {
        for (int n = 0; n < N; ++n) {
            prefix[0] = 0.0;
            for (int i = 0; i < L; ++i) {
                prefix[i + 1] = prefix[i] + x.at(b, i, n);
            }
            const double first = x.at(b, 0, n);
            const double last = x.at(b, L - 1, n);
            for (int i = 0; i < L; ++i) {
                const int lo = i - pad;
                const int hi = i + pad;
                const int below = lo < 0 ? -lo : 0;
                const int above = hi > L - 1 ? hi - (L - 1) : 0;
                const int a = lo < 0 ? 0 : lo;
                const int z = hi > L - 1 ? L - 1 : hi;
                const double sum = prefix[z + 1] - prefix[a] + below * first + above * last;
                const double t = sum / kernel;
                trend.at(b, i, n) = t;
                seasonal.at(b, i, n) = x.at(b, i, n) - t;
            }
        }
    }
}

Tensor3 forward(const ForecasterParams& params, const Tensor3& inputs) {
    check_params(params);
    check_inputs(params, inputs);

    const int B = inputs.batch;
    const int H = params.horizon;
    const int N = inputs.vars;
    Matrix out(B * N, H);

    if (params.kind == ModelKind::Linear) {
        const Matrix x = to_channel_rows(inputs);
        apply_linear(x, params.weights[0], params.biases[0], out);
    } else {
        Tensor3 trend;
        Tensor3 seasonal;
        moving_average_decompose(inputs, params.kernel, trend, seasonal);
        const Matrix xt = to_channel_rows(trend);
        const Matrix xs = to_channel_rows(seasonal);
        apply_linear(xt, params.weights[0], params.biases[0], out);
        apply_linear(xs, params.weights[1], params.biases[1], out);
    }
    return from_channel_rows(out, B, H, N);
}

GradSet backward(const ForecasterParams& params, const Tensor3& inputs, const Tensor3& upstream) {
    check_params(params);
    check_inputs(params, inputs);
    if (upstream.batch != inputs.batch || upstream.steps != params.horizon ||
        upstream.vars != inputs.vars) {
        throw std::invalid_argument("backward: upstream gradient shape disagrees with the forecast");
    }

    GradSet grads = zero_grads(params);
    const Matrix u = to_channel_rows(upstream);

    std::vector<double> bias_grad(static_cast<std::size_t>(params.horizon), 0.0);
    for (int r = 0; r < u.n_rows; ++r) {
        const double* urow = u.row(r);
        for (int h = 0; h < params.horizon; ++h) {
            bias_grad[h] += urow[h];
        }
    }

    if (params.kind == ModelKind::Linear) {
        const Matrix x = to_channel_rows(inputs);
        accumulate_outer(u, x, grads.weights[0]);
        grads.biases[0] = bias_grad;
    } else {
        Tensor3 trend;
        Tensor3 seasonal;
        moving_average_decompose(inputs, params.kernel, trend, seasonal);
        const Matrix xt = to_channel_rows(trend);
        const Matrix xs = to_channel_rows(seasonal);
        accumulate_outer(u, xt, grads.weights[0]);
        accumulate_outer(u, xs, grads.weights[1]);
        grads.biases[0] = bias_grad;
        grads.biases[1] = bias_grad;
    }
    return grads;
}

std::int64_t param_count(const ForecasterParams& params) {
    std::int64_t count = 0;
    for (const Matrix& w : params.weights) {
        count += static_cast<std::int64_t>(w.size());
    }
    for (const auto& b : params.biases) {
        count += static_cast<std::int64_t>(b.size());
    }
    return count;
}

ForecasterParams init_params(ModelKind kind, int lookback, int horizon, int kernel,
                             std::uint64_t seed) {
    if (lookback < 1 || horizon < 1) {
        throw std::invalid_argument("init_params: lookback and horizon must be >= 1");
    }
    if (kind == ModelKind::DLinear) {
        check_kernel(kernel, lookback);
    }

    ForecasterParams params;
    params.kind = kind;
    params.lookback = lookback;
    params.horizon = horizon;
    params.kernel = kernel;

    const int blocks = kind == ModelKind::Linear ? 1 : 2;
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / lookback;
    std::uniform_real_distribution<double> uniform(-bound, bound);

    for (int blk = 0; blk < blocks; ++blk) {
        Matrix w(horizon, lookback);
        for (double& v : w.data) {
            v = uniform(rng);
        }
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(static_cast<std::size_t>(horizon), 0.0);
    }
    return params;
}

GradSet zero_grads(const ForecasterParams& params) {
    GradSet grads;
    for (const Matrix& w : params.weights) {
        grads.weights.emplace_back(w.n_rows, w.n_cols);
    }
    for (const auto& b : params.biases) {
        grads.biases.emplace_back(b.size(), 0.0);
    }
    return grads;
}

std::vector<std::string> ForecasterParams::array_names() const {
    if (kind == ModelKind::Linear) {
        return {"weight", "bias"};
    }
    return {"weight_trend", "weight_seasonal", "bias_trend", "bias_seasonal"};
}

void save_checkpoint(const ForecasterParams& params, const std::string& path,
                     const std::string& note) {
    check_params(params);
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("save_checkpoint: cannot open '" + path + "' for writing");
    }

    out << "forecaster-checkpoint v1\n";
    if (!note.empty()) {
        out << "# " << note << '\n';
    }
    out << "kind " << (params.kind == ModelKind::Linear ? "linear" : "dlinear") << '\n';
    out << "lookback " << params.lookback << '\n';
    out << "horizon " << params.horizon << '\n';
    out << "kernel " << params.kernel << '\n';

    const std::vector<std::string> names = params.array_names();
    char buf[48];
    std::size_t name_idx = 0;
    for (const Matrix& w : params.weights) {
        out << "array " << names[name_idx++] << ' ' << w.n_rows << ' ' << w.n_cols << '\n';
        for (int r = 0; r < w.n_rows; ++r) {
            const double* row = w.row(r);
            for (int c = 0; c < w.n_cols; ++c) {
                std::snprintf(buf, sizeof(buf), "%a", row[c]);
                out << (c ? " " : "") << buf;
            }
            out << '\n';
        }
    }
    for (const auto& b : params.biases) {
        out << "array " << names[name_idx++] << ' ' << b.size() << '\n';
        for (std::size_t i = 0; i < b.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", b[i]);
            out << (i ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("save_checkpoint: write to '" + path + "' failed");
    }
}

namespace {

double parse_hex_double(const std::string& token, const std::string& path) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + token.size()) {
        throw std::invalid_argument("load_checkpoint: bad value '" + token + "' in '" + path + "'");
    }
    return v;
}

} // namespace

ForecasterParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("load_checkpoint: cannot open '" + path + "'");
    }

    std::string line;
    if (!std::getline(in, line) || line.rfind("forecaster-checkpoint", 0) != 0) {
        throw std::invalid_argument("load_checkpoint: '" + path + "' is not a forecaster checkpoint");
    }

    ForecasterParams params;
    params.kind = ModelKind::Linear;
    params.lookback = params.horizon = 0;

    std::vector<std::pair<std::string, std::vector<double>>> arrays;
    std::vector<std::pair<int, int>> shapes;

    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "kind") {
            std::string kind;
            ls >> kind;
            if (kind == "linear") {
                params.kind = ModelKind::Linear;
            } else if (kind == "dlinear") {
                params.kind = ModelKind::DLinear;
            } else {
                throw std::invalid_argument("load_checkpoint: unknown model kind '" + kind + "'");
            }
        } else if (key == "lookback") {
            ls >> params.lookback;
        } else if (key == "horizon") {
            ls >> params.horizon;
        } else if (key == "kernel") {
            ls >> params.kernel;
        } else if (key == "array") {
            std::string name;
            int rows = 0;
            int cols = 1;
            ls >> name >> rows;
            if (!(ls >> cols)) {
                cols = -1; // one-dimensional array
            }
            const std::size_t total =
                static_cast<std::size_t>(rows) * (cols > 0 ? static_cast<std::size_t>(cols) : 1);
            std::vector<double> values;
            values.reserve(total);
            std::string token;
            while (values.size() < total && in >> token) {
                values.push_back(parse_hex_double(token, path));
            }
            if (values.size() != total) {
                throw std::invalid_argument("load_checkpoint: truncated array '" + name + "' in '" + path + "'");
            }
            in.ignore();
            arrays.emplace_back(name, std::move(values));
            shapes.emplace_back(rows, cols);
        } else {
            throw std::invalid_argument("load_checkpoint: unknown directive '" + key + "' in '" + path + "'");
        }
    }

    const std::vector<std::string> expected = params.array_names();
    if (arrays.size() != expected.size()) {
        throw std::invalid_argument("load_checkpoint: wrong array count in '" + path + "'");
    }
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        if (arrays[i].first != expected[i]) {
            throw std::invalid_argument("load_checkpoint: expected array '" + expected[i] + "', found '" +
                                        arrays[i].first + "'");
        }
        if (shapes[i].second > 0) {
            Matrix w(shapes[i].first, shapes[i].second);
            w.data = std::move(arrays[i].second);
            params.weights.push_back(std::move(w));
        } else {
            params.biases.push_back(std::move(arrays[i].second));
        }
    }
    check_params(params);
    return params;
}

} // namespace tdalign
