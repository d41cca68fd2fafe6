#pragma once

#include "tdalign/tensor.hpp"

namespace tdalign {

/** Pointwise base loss applied to values and to differences. */
enum class LossBase { Mse, Mae };

/**
 * How the point loss L_Y and the difference loss L_D are combined:
 *   BaselineOnly   L = L_Y
 *   PlusLd         L = L_Y + L_D
 *   RhoOnly        L = rho * L_Y
 *   FixedAlpha     L = alpha * L_Y + (1 - alpha) * L_D
 *   LearnableAlpha same as FixedAlpha, alpha trained via a sigmoid logit
 *   TdAlign        L = rho * L_Y + (1 - rho) * L_D
 * rho is the sign-inconsistency ratio of the current batch and is treated as
 * a constant when differentiating.
 */
enum class LossMode { BaselineOnly, PlusLd, RhoOnly, FixedAlpha, LearnableAlpha, TdAlign };

/**
 * Differencing applied to targets and predictions: a k-step difference taken
 * `order` times. Steps that would reach past the first target row borrow the
 * trailing true input rows, so the output keeps length H.
 */
struct DiffSpec {
    int order = 1;
    int interval = 1;
};

struct LossConfig {
    LossBase base = LossBase::Mse;
    LossMode mode = LossMode::TdAlign;
    double alpha = 0.5;   // used by FixedAlpha / LearnableAlpha
    DiffSpec diff;
};

/** Components of one combined-loss evaluation over a batch. */
struct LossReport {
    double loss_y = 0.0;
    double loss_d = 0.0;
    double rho = 0.0;
    double total = 0.0;
    Tensor3 grad;   // d total / d prediction, B x H x N
};

/** Evaluation metrics on the normalized scale; differences use order 1, interval 1. */
struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    double mse_d = 0.0;
    double mae_d = 0.0;
    double rho = 0.0;
};

/**
 * Differences of the true targets. `context` holds the trailing true input
 * rows (B x C x N, oldest first, C >= order * interval); its last row is the
 * anchor.
 */
Tensor3 tdt(const Tensor3& targets, const Tensor3& context, const DiffSpec& spec);

/**
 * Differences of the predictions, anchored at the true context: steps that
 * reach before the first predicted row use the true input rows, so the first
 * predicted difference is measured against the last observation.
 */
Tensor3 tdp(const Tensor3& predictions, const Tensor3& context, const DiffSpec& spec);

/** Mean pointwise loss over batch, horizon, and variables. */
double point_loss(const Tensor3& y, const Tensor3& yhat, LossBase base);

/** Mean pointwise loss between difference tensors. */
double tdt_loss(const Tensor3& d, const Tensor3& dhat, LossBase base);

/**
 * Sign-inconsistency ratio: the fraction of entries whose true and predicted
 * differences disagree in sign, with sgn(0) = 0. Always in [0, 1].
 */
double sign_inconsistency(const Tensor3& d, const Tensor3& dhat);

/**
 * Evaluates L_Y, L_D, rho, the mode-combined total, and the analytic gradient
 * of the total w.r.t. the prediction.
 */
LossReport combined_loss(const Tensor3& y, const Tensor3& yhat, const Tensor3& context,
                         const LossConfig& cfg);

/** Gradient of the combined total w.r.t. the prediction (rho held constant). */
Tensor3 loss_grad_wrt_prediction(const Tensor3& y, const Tensor3& yhat, const Tensor3& context,
                                 const LossConfig& cfg);

/** MSE/MAE on values plus MSE/MAE/rho on first differences (anchor = B x N). */
MetricsReport evaluate_metrics(const Tensor3& y, const Tensor3& yhat, const Matrix& anchor);

} // namespace tdalign
