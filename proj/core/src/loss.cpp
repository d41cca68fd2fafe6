#include "tdalign/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tdalign {

namespace {

int sgn(double x) {
    return (x > 0.0) - (x < 0.0);
}

void check_diff_spec(const DiffSpec& spec, const Tensor3& context) {
    if (spec.order < 1 || spec.interval < 1) {
        throw std::invalid_argument("DiffSpec: order and interval must be >= 1");
    }
    if (context.steps < spec.order * spec.interval) {
        throw std::invalid_argument("tdt/tdp: context must hold at least order * interval rows");
    }
}

/**
 * Shared differencing core: prepends the last order*interval context rows to
 * the sequence, applies the k-step difference `order` times in place, and
 * returns the trailing H values.
 */
Tensor3 difference(const Tensor3& seq, const Tensor3& context, const DiffSpec& spec) {
    if (seq.batch != context.batch || seq.vars != context.vars) {
        throw std::invalid_argument("tdt/tdp: sequence and context shapes disagree");
    }
    check_diff_spec(spec, context);

    const int B = seq.batch;
    const int H = seq.steps;
    const int N = seq.vars;
    const int k = spec.interval;
    const int C = spec.order * k;
    const int M = C + H;
    const int ctx_off = context.steps - C;

    Tensor3 out(B, H, N);
    std::vector<double> ext(static_cast<std::size_t>(M));
    for (int b = 0; b < B; ++b) {
        for (int n = 0; n < N; ++n) {
            for (int i = 0; i < C; ++i) {
                ext[i] = context.at(b, ctx_off + i, n);
            }
            for (int i = 0; i < H; ++i) {
                ext[C + i] = seq.at(b, i, n);
            }
            for (int pass = 1; pass <= spec.order; ++pass) {
                for (int j = M - 1; j >= pass * k; --j) {
                    ext[j] -= ext[j - k];
                }
            }
            for (int i = 0; i < H; ++i) {
                out.at(b, i, n) = ext[C + i];
            }
        }
    }
    return out;
}

double mean_loss(const Tensor3& a, const Tensor3& b, LossBase base) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("loss: tensor shapes disagree");
    }
    if (a.size() == 0) {
        throw std::invalid_argument("loss: empty tensors");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double u = b.data[i] - a.data[i];
        acc += base == LossBase::Mse ? u * u : std::abs(u);
    }
    return acc / static_cast<double>(a.size());
}

struct ModeWeights {
    double wy = 1.0;
    double wd = 0.0;
};

ModeWeights mode_weights(const LossConfig& cfg, double rho) {
    switch (cfg.mode) {
        case LossMode::BaselineOnly:
            return {1.0, 0.0};
        case LossMode::PlusLd:
            return {1.0, 1.0};
        case LossMode::RhoOnly:
            return {rho, 0.0};
        case LossMode::FixedAlpha:
        case LossMode::LearnableAlpha:
            if (cfg.alpha < 0.0 || cfg.alpha > 1.0) {
                throw std::invalid_argument("LossConfig: alpha must lie in [0, 1]");
            }
            return {cfg.alpha, 1.0 - cfg.alpha};
        case LossMode::TdAlign:
            return {rho, 1.0 - rho};
    }
    throw std::invalid_argument("LossConfig: unknown mode");
}

/** n-choose-p for the small orders used by repeated differencing. */
double binomial(int n, int p) {
    double c = 1.0;
    for (int i = 1; i <= p; ++i) {
        c = c * (n - p + i) / i;
    }
    return c;
}

} // namespace

Tensor3 tdt(const Tensor3& targets, const Tensor3& context, const DiffSpec& spec) {
    return difference(targets, context, spec);
}

Tensor3 tdp(const Tensor3& predictions, const Tensor3& context, const DiffSpec& spec) {
    return difference(predictions, context, spec);
}

double point_loss(const Tensor3& y, const Tensor3& yhat, LossBase base) {
    return mean_loss(y, yhat, base);
}

double tdt_loss(const Tensor3& d, const Tensor3& dhat, LossBase base) {
    return mean_loss(d, dhat, base);
}

double sign_inconsistency(const Tensor3& d, const Tensor3& dhat) {
    if (!d.same_shape(dhat)) {
        throw std::invalid_argument("sign_inconsistency: tensor shapes disagree");
    }
    if (d.size() == 0) {
        throw std::invalid_argument("sign_inconsistency: empty tensors");
    }
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        mismatches += sgn(d.data[i]) != sgn(dhat.data[i]);
    }
    return static_cast<double>(mismatches) / static_cast<double>(d.size());
}

LossReport combined_loss(const Tensor3& y, const Tensor3& yhat, const Tensor3& context,
                         const LossConfig& cfg) {
    if (!y.same_shape(yhat)) {
        throw std::invalid_argument("combined_loss: target and prediction shapes disagree");
    }

    const Tensor3 d = tdt(y, context, cfg.diff);
    const Tensor3 dhat = tdp(yhat, context, cfg.diff);

    LossReport report;
    report.loss_y = point_loss(y, yhat, cfg.base);
    report.loss_d = tdt_loss(d, dhat, cfg.base);
    report.rho = sign_inconsistency(d, dhat);

    const ModeWeights w = mode_weights(cfg, report.rho);
    report.total = w.wy * report.loss_y + w.wd * report.loss_d;

    const int B = y.batch;
    const int H = y.steps;
    const int N = y.vars;
    const double inv_count = 1.0 / static_cast<double>(y.size());
    report.grad = Tensor3(B, H, N);

    for (int b = 0; b < B; ++b) {
        for (int i = 0; i < H; ++i) {
            for (int n = 0; n < N; ++n) {
                const double u = yhat.at(b, i, n) - y.at(b, i, n);
                const double g = cfg.base == LossBase::Mse ? 2.0 * u : static_cast<double>(sgn(u));
                report.grad.at(b, i, n) = w.wy * g * inv_count;
            }
        }
    }

    if (w.wd != 0.0) {
        const int tau = cfg.diff.order;
        const int k = cfg.diff.interval;
        for (int b = 0; b < B; ++b) {
            for (int i = 0; i < H; ++i) {
                for (int n = 0; n < N; ++n) {
                    const double r = dhat.at(b, i, n) - d.at(b, i, n);
                    const double g = cfg.base == LossBase::Mse ? 2.0 * r : static_cast<double>(sgn(r));
                    if (g == 0.0) {
                        continue;
                    }
                    // dhat[i] depends on yhat[i - p*k] with weight (-1)^p C(tau, p);
                    // earlier indices fall into the true context and are constant.
                    for (int p = 0; p <= tau; ++p) {
                        const int j = i - p * k;
                        if (j < 0) {
                            break;
                        }
                        const double coeff = (p % 2 == 0 ? 1.0 : -1.0) * binomial(tau, p);
                        report.grad.at(b, j, n) += w.wd * coeff * g * inv_count;
                    }
                }
            }
        }
    }
    return report;
}

Tensor3 loss_grad_wrt_prediction(const Tensor3& y, const Tensor3& yhat, const Tensor3& context,
                                 const LossConfig& cfg) {
    return combined_loss(y, yhat, context, cfg).grad;
}

MetricsReport evaluate_metrics(const Tensor3& y, const Tensor3& yhat, const Matrix& anchor) {
    if (anchor.n_rows != y.batch || anchor.n_cols != y.vars) {
        throw std::invalid_argument("evaluate_metrics: anchor shape disagrees with targets");
    }
    Tensor3 context(y.batch, 1, y.vars);
    context.data = anchor.data;

    const DiffSpec first_diff{1, 1};
    const Tensor3 d = tdt(y, context, first_diff);
    const Tensor3 dhat = tdp(yhat, context, first_diff);

    MetricsReport m;
    m.mse = point_loss(y, yhat, LossBase::Mse);
    m.mae = point_loss(y, yhat, LossBase::Mae);
    m.mse_d = tdt_loss(d, dhat, LossBase::Mse);
    m.mae_d = tdt_loss(d, dhat, LossBase::Mae);
    m.rho = sign_inconsistency(d, dhat);
    return m;
}

} // namespace tdalign
