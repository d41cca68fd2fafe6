#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace tdalign {

/** Dense row-major matrix of doubles. */
struct Matrix {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : n_rows(rows), n_cols(cols),
          data(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
        if (rows < 0 || cols < 0) {
            throw std::invalid_argument("Matrix: negative dimension");
        }
    }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * n_cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * n_cols + c]; }

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * n_cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * n_cols; }

    bool same_shape(const Matrix& other) const {
        return n_rows == other.n_rows && n_cols == other.n_cols;
    }
    std::size_t size() const { return data.size(); }
};

/**
 * Dense batch x steps x vars tensor, row-major with vars fastest.
 * Used for window inputs (B x L x N), targets and predictions (B x H x N).
 */
struct Tensor3 {
    int batch = 0;
    int steps = 0;
    int vars = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int b, int s, int v, double fill = 0.0)
        : batch(b), steps(s), vars(v),
          data(static_cast<std::size_t>(b) * s * v, fill) {
        if (b < 0 || s < 0 || v < 0) {
            throw std::invalid_argument("Tensor3: negative dimension");
        }
    }

    double& at(int b, int i, int n) {
        return data[(static_cast<std::size_t>(b) * steps + i) * vars + n];
    }
    double at(int b, int i, int n) const {
        return data[(static_cast<std::size_t>(b) * steps + i) * vars + n];
    }

    bool same_shape(const Tensor3& other) const {
        return batch == other.batch && steps == other.steps && vars == other.vars;
    }
    std::size_t size() const { return data.size(); }
};

} // namespace tdalign
