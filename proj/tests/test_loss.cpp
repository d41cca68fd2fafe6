#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "tdalign/loss.hpp"

using namespace tdalign;

namespace {

Tensor3 column(const std::vector<double>& values) {
    Tensor3 t(1, static_cast<int>(values.size()), 1);
    t.data = values;
    return t;
}

Tensor3 random_tensor(int b, int s, int n, std::mt19937_64& rng, double scale = 1.0) {
    Tensor3 t(b, s, n);
    std::normal_distribution<double> normal(0.0, scale);
    for (double& v : t.data) {
        v = normal(rng);
    }
    return t;
}

double binom(int n, int p) {
    double c = 1.0;
    for (int i = 1; i <= p; ++i) {
        c = c * (n - p + i) / i;
    }
    return c;
}

/** Independent differencing oracle via the signed binomial expansion. */
Tensor3 binomial_difference(const Tensor3& seq, const Tensor3& context, const DiffSpec& spec) {
    const int C = spec.order * spec.interval;
    const int H = seq.steps;
    Tensor3 out(seq.batch, H, seq.vars);
    for (int b = 0; b < seq.batch; ++b) {
        for (int n = 0; n < seq.vars; ++n) {
            std::vector<double> ext;
            for (int i = 0; i < C; ++i) {
                ext.push_back(context.at(b, context.steps - C + i, n));
            }
            for (int i = 0; i < H; ++i) {
                ext.push_back(seq.at(b, i, n));
            }
            for (int i = 0; i < H; ++i) {
                double acc = 0.0;
                for (int p = 0; p <= spec.order; ++p) {
                    const double sign = p % 2 == 0 ? 1.0 : -1.0;
                    acc += sign * binom(spec.order, p) * ext[C + i - p * spec.interval];
                }
                out.at(b, i, n) = acc;
            }
        }
    }
    return out;
}

} // namespace

TEST_SUITE("loss") {

TEST_CASE("first differences anchor at the last observation") {
    const Tensor3 y = column({3, 6, 10});
    const Tensor3 yhat = column({2, 5, 9});
    const Tensor3 context = column({1});
    const DiffSpec spec{1, 1};

    const Tensor3 d = tdt(y, context, spec);
    CHECK(d.data == std::vector<double>{2, 3, 4});

    const Tensor3 dhat = tdp(yhat, context, spec);
    CHECK(dhat.data == std::vector<double>{1, 3, 4});
}

TEST_CASE("repeated differencing borrows trailing true rows") {
    const Tensor3 y = column({3, 6, 10});
    const Tensor3 context = column({0, 1});

    const Tensor3 second = tdt(y, context, DiffSpec{2, 1});
    CHECK(second.data == std::vector<double>{1, 1, 1});

    const Tensor3 spaced = tdt(y, context, DiffSpec{1, 2});
    CHECK(spaced.data == std::vector<double>{3, 5, 7});
}

TEST_CASE("differencing uses only the trailing context rows") {
    const Tensor3 y = column({5, 7});
    const Tensor3 long_context = column({100, 200, 2});
    const Tensor3 d = tdt(y, long_context, DiffSpec{1, 1});
    CHECK(d.data == std::vector<double>{3, 2});
}

TEST_CASE("differencing matches the signed binomial expansion") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> tau_dist(1, 3);
    std::uniform_int_distribution<int> k_dist(1, 3);
    std::uniform_int_distribution<int> h_dist(1, 10);
    std::uniform_int_distribution<int> b_dist(1, 3);

    for (int inst = 0; inst < 200; ++inst) {
        const DiffSpec spec{tau_dist(rng), k_dist(rng)};
        const int H = h_dist(rng);
        const int B = b_dist(rng);
        const Tensor3 seq = random_tensor(B, H, 2, rng);
        const Tensor3 context = random_tensor(B, spec.order * spec.interval, 2, rng);

        const Tensor3 got = tdt(seq, context, spec);
        const Tensor3 want = binomial_difference(seq, context, spec);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("differencing validates shapes and spec") {
    const Tensor3 y = column({1, 2});
    CHECK_THROWS_AS((void)tdt(y, column({1}), DiffSpec{2, 1}), std::invalid_argument);
    CHECK_THROWS_AS((void)tdt(y, column({1}), DiffSpec{0, 1}), std::invalid_argument);
    CHECK_THROWS_AS((void)tdt(y, column({1}), DiffSpec{1, 0}), std::invalid_argument);
    CHECK_THROWS_AS((void)tdt(y, Tensor3(2, 1, 1), DiffSpec{1, 1}), std::invalid_argument);
}

TEST_CASE("point and difference losses by hand") {
    const Tensor3 a = column({1, 2});
    const Tensor3 b = column({2, 4});
    CHECK(point_loss(a, b, LossBase::Mse) == doctest::Approx(2.5));
    CHECK(point_loss(a, b, LossBase::Mae) == doctest::Approx(1.5));
    CHECK(tdt_loss(a, b, LossBase::Mse) == doctest::Approx(2.5));
    CHECK_THROWS_AS((void)point_loss(a, column({1}), LossBase::Mse), std::invalid_argument);
}

TEST_CASE("sign inconsistency counts disagreements with sgn(0) = 0") {
    CHECK(sign_inconsistency(column({1, -1, 0, 2}), column({2, 1, 0, -1})) == doctest::Approx(0.5));
    CHECK(sign_inconsistency(column({0}), column({1})) == 1.0);
    CHECK(sign_inconsistency(column({0}), column({0})) == 0.0);
    CHECK(sign_inconsistency(column({-2, -3}), column({-1, -9})) == 0.0);
}

TEST_CASE("inconsistency ratio stays within bounds on fuzzed inputs") {
    std::mt19937_64 rng(7);
    for (int inst = 0; inst < 200; ++inst) {
        const Tensor3 d = random_tensor(2, 9, 2, rng);
        const Tensor3 dhat = random_tensor(2, 9, 2, rng);
        const double rho = sign_inconsistency(d, dhat);
        CHECK(rho >= 0.0);
        CHECK(rho <= 1.0);
        CHECK(sign_inconsistency(d, d) == 0.0);

        Tensor3 neg = d;
        bool any_zero = false;
        for (double& v : neg.data) {
            any_zero = any_zero || v == 0.0;
            v = -v;
        }
        if (!any_zero) {
            CHECK(sign_inconsistency(d, neg) == 1.0);
        }
    }
}

TEST_CASE("mode weights combine the two losses as documented") {
    std::mt19937_64 rng(3);
    const Tensor3 y = random_tensor(2, 6, 2, rng);
    const Tensor3 yhat = random_tensor(2, 6, 2, rng);
    const Tensor3 context = random_tensor(2, 2, 2, rng);

    LossConfig cfg;
    cfg.diff = DiffSpec{1, 1};

    cfg.mode = LossMode::BaselineOnly;
    const LossReport base = combined_loss(y, yhat, context, cfg);
    CHECK(base.total == base.loss_y);

    cfg.mode = LossMode::PlusLd;
    const LossReport plus = combined_loss(y, yhat, context, cfg);
    CHECK(plus.total == doctest::Approx(plus.loss_y + plus.loss_d).epsilon(1e-15));

    cfg.mode = LossMode::RhoOnly;
    const LossReport rho_only = combined_loss(y, yhat, context, cfg);
    CHECK(rho_only.total == doctest::Approx(rho_only.rho * rho_only.loss_y).epsilon(1e-15));

    cfg.mode = LossMode::FixedAlpha;
    cfg.alpha = 0.25;
    const LossReport fixed = combined_loss(y, yhat, context, cfg);
    CHECK(fixed.total ==
          doctest::Approx(0.25 * fixed.loss_y + 0.75 * fixed.loss_d).epsilon(1e-15));

    cfg.mode = LossMode::TdAlign;
    const LossReport td = combined_loss(y, yhat, context, cfg);
    CHECK(td.total ==
          doctest::Approx(td.rho * td.loss_y + (1.0 - td.rho) * td.loss_d).epsilon(1e-15));
    CHECK(td.loss_y == base.loss_y);

    cfg.mode = LossMode::FixedAlpha;
    cfg.alpha = 1.5;
    CHECK_THROWS_AS((void)combined_loss(y, yhat, context, cfg), std::invalid_argument);
}

TEST_CASE("rho scales the baseline gradient in RhoOnly mode") {
    std::mt19937_64 rng(5);
    const Tensor3 y = random_tensor(2, 5, 2, rng);
    const Tensor3 yhat = random_tensor(2, 5, 2, rng);
    const Tensor3 context = random_tensor(2, 1, 2, rng);

    LossConfig cfg;
    cfg.mode = LossMode::BaselineOnly;
    const LossReport base = combined_loss(y, yhat, context, cfg);
    cfg.mode = LossMode::RhoOnly;
    const LossReport scaled = combined_loss(y, yhat, context, cfg);

    for (std::size_t i = 0; i < base.grad.size(); ++i) {
        CHECK(scaled.grad.data[i] ==
              doctest::Approx(scaled.rho * base.grad.data[i]).epsilon(1e-15));
    }
}

namespace {

struct FrozenWeights {
    double wy = 0.0;
    double wd = 0.0;
};

FrozenWeights frozen_weights(const LossConfig& cfg, const LossReport& at_base) {
    switch (cfg.mode) {
        case LossMode::BaselineOnly:
            return {1.0, 0.0};
        case LossMode::PlusLd:
            return {1.0, 1.0};
        case LossMode::RhoOnly:
            return {at_base.rho, 0.0};
        case LossMode::FixedAlpha:
        case LossMode::LearnableAlpha:
            return {cfg.alpha, 1.0 - cfg.alpha};
        case LossMode::TdAlign:
            return {at_base.rho, 1.0 - at_base.rho};
    }
    return {};
}

/** Total with rho frozen at the unperturbed value, as the analytic gradient assumes. */
double frozen_total(const Tensor3& y, const Tensor3& yhat, const Tensor3& context,
                    const LossConfig& cfg, const FrozenWeights& w) {
    double total = w.wy * point_loss(y, yhat, cfg.base);
    if (w.wd != 0.0) {
        total += w.wd * tdt_loss(tdt(y, context, cfg.diff), tdp(yhat, context, cfg.diff), cfg.base);
    }
    return total;
}

} // namespace

TEST_CASE("analytic gradient matches central finite differences in every mode") {
    std::mt19937_64 rng(11);
    const double step = 1e-6;

    const LossMode modes[] = {LossMode::BaselineOnly, LossMode::PlusLd, LossMode::RhoOnly,
                              LossMode::FixedAlpha, LossMode::TdAlign};
    const LossBase bases[] = {LossBase::Mse, LossBase::Mae};
    const DiffSpec specs[] = {{1, 1}, {2, 1}, {1, 2}};

    for (const LossMode mode : modes) {
        for (const LossBase base : bases) {
            for (const DiffSpec& spec : specs) {
                LossConfig cfg;
                cfg.mode = mode;
                cfg.base = base;
                cfg.alpha = 0.3;
                cfg.diff = spec;

                // keep every value and difference residual away from the MAE
                // kink and from sign boundaries
                Tensor3 y(2, 4, 2);
                Tensor3 yhat(2, 4, 2);
                Tensor3 context(2, spec.order * spec.interval, 2);
                bool safe = false;
                while (!safe) {
                    y = random_tensor(2, 4, 2, rng);
                    yhat = random_tensor(2, 4, 2, rng);
                    context = random_tensor(2, spec.order * spec.interval, 2, rng);
                    safe = true;
                    const Tensor3 d = tdt(y, context, cfg.diff);
                    const Tensor3 dhat = tdp(yhat, context, cfg.diff);
                    for (std::size_t i = 0; i < y.size(); ++i) {
                        safe = safe && std::abs(yhat.data[i] - y.data[i]) > 1e-3 &&
                               std::abs(dhat.data[i] - d.data[i]) > 1e-3;
                    }
                }

                const LossReport report = combined_loss(y, yhat, context, cfg);
                const FrozenWeights w = frozen_weights(cfg, report);

                Tensor3 probe = yhat;
                for (std::size_t i = 0; i < probe.size(); ++i) {
                    const double keep = probe.data[i];
                    probe.data[i] = keep + step;
                    const double up = frozen_total(y, probe, context, cfg, w);
                    probe.data[i] = keep - step;
                    const double down = frozen_total(y, probe, context, cfg, w);
                    probe.data[i] = keep;

                    const double fd = (up - down) / (2.0 * step);
                    const double got = report.grad.data[i];
                    const double denom = std::max({std::abs(fd), std::abs(got), 1e-3});
                    CHECK(std::abs(fd - got) / denom <= 1e-6);
                }
            }
        }
    }
}

TEST_CASE("evaluate_metrics by hand") {
    const Tensor3 y = column({2, 4});
    const Tensor3 yhat = column({3, 3});
    Matrix anchor(1, 1);
    anchor.data = {1.0};

    const MetricsReport m = evaluate_metrics(y, yhat, anchor);
    CHECK(m.mse == doctest::Approx(1.0));
    CHECK(m.mae == doctest::Approx(1.0));
    // d = [1, 2], dhat = [2, 0]
    CHECK(m.mse_d == doctest::Approx(2.5));
    CHECK(m.mae_d == doctest::Approx(1.5));
    CHECK(m.rho == doctest::Approx(0.5));

    CHECK_THROWS_AS((void)evaluate_metrics(y, yhat, Matrix(2, 1)), std::invalid_argument);
}

} // TEST_SUITE
