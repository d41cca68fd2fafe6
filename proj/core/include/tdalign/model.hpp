#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdalign/tensor.hpp"

namespace tdalign {

enum class ModelKind { Linear, DLinear };

/**
 * Parameters of a channel-shared linear forecaster mapping a length-L input
 * window to a length-H forecast, applied identically to every variable.
 *
 * Linear:  one H x L weight matrix and one length-H bias.
 * DLinear: the input is split into a moving-average trend and a seasonal
 *          remainder; each part gets its own H x L weights and length-H bias
 *          and the two forecasts are summed.
 */
struct ForecasterParams {
    ModelKind kind = ModelKind::Linear;
    int lookback = 0;
    int horizon = 0;
    int kernel = 25;                           // moving-average window (DLinear)
    std::vector<Matrix> weights;               // 1 (Linear) or 2 (DLinear) H x L matrices
    std::vector<std::vector<double>> biases;   // matching length-H biases

    /** Names of the parameter arrays, in checkpoint order. */
    std::vector<std::string> array_names() const;
};

/** Parameter-shaped gradient accumulator. */
struct GradSet {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

/**
 * Centered moving average with replicate padding at both ends; kernel must be
 * odd and within [1, 2L-1]. seasonal is defined as x - trend, so the two
 * parts recompose the input up to floating-point rounding.
 */
void moving_average_decompose(const Tensor3& x, int kernel, Tensor3& trend, Tensor3& seasonal);

/** Forecast for a batch of input windows (B x L x N) -> B x H x N. */
Tensor3 forward(const ForecasterParams& params, const Tensor3& inputs);

/**
 * Gradients of the training loss w.r.t. every parameter array, given the
 * upstream gradient w.r.t. the forecast (B x H x N).
 */
GradSet backward(const ForecasterParams& params, const Tensor3& inputs, const Tensor3& upstream);

/** Total number of trainable scalars. */
std::int64_t param_count(const ForecasterParams& params);

/** Weights i.i.d. Uniform[-1/L, 1/L], biases zero; deterministic in the seed. */
ForecasterParams init_params(ModelKind kind, int lookback, int horizon, int kernel,
                             std::uint64_t seed);

/** Zero gradients shaped like `params`. */
GradSet zero_grads(const ForecasterParams& params);

/**
 * Text checkpoint: a header with the model shape followed by one named array
 * per block, values in hexfloat so doubles round-trip bit-exactly.
 */
void save_checkpoint(const ForecasterParams& params, const std::string& path,
                     const std::string& note = "");
ForecasterParams load_checkpoint(const std::string& path);

} // namespace tdalign
