#include "tdalign/theory.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace tdalign {

namespace {

constexpr double kPacfBound = 1.0 - 1e-6;

void check_pacf(std::span<const double> errors, std::span<const double> pacf) {
    if (errors.size() < 1) {
        throw std::invalid_argument("theory: need at least one error term");
    }
    if (pacf.size() + 1 != errors.size()) {
        throw std::invalid_argument("theory: need one pacf coefficient per consecutive error pair");
    }
    for (double phi : pacf) {
        if (!(std::abs(phi) <= kPacfBound)) {
            throw std::invalid_argument("theory: |phi| must be <= 1 - 1e-6");
        }
    }
}

} // namespace

double discrepancy_psi(std::span<const double> errors, std::span<const double> pacf) {
    check_pacf(errors, pacf);
    // extended precision keeps the identity with the Markov NLL tight even for
    // long horizons and |phi| near 1
    long double psi = 0.0L;
    for (std::size_t i = 1; i < errors.size(); ++i) {
        const long double phi = pacf[i - 1];
        const long double e = errors[i];
        const long double ep = errors[i - 1];
        psi += (phi * phi * (e * e + ep * ep) - 2.0L * phi * e * ep) / (1.0L - phi * phi);
    }
    return static_cast<double>(psi);
}

double markov_nll_core(std::span<const double> errors, std::span<const double> pacf) {
    check_pacf(errors, pacf);
    long double nll = static_cast<long double>(errors[0]) * errors[0];
    for (std::size_t i = 1; i < errors.size(); ++i) {
        const long double phi = pacf[i - 1];
        const long double r = errors[i] - phi * errors[i - 1];
        nll += r * r / (1.0L - phi * phi);
    }
    return static_cast<double>(nll);
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double expected_rho(std::span<const double> d, double sigma_e) {
    if (d.empty()) {
        throw std::invalid_argument("expected_rho: empty difference vector");
    }
    if (sigma_e <= 0.0) {
        throw std::invalid_argument("expected_rho: sigma_e must be positive");
    }
    double acc = 0.0;
    for (double di : d) {
        acc += std_normal_cdf(-std::abs(di) / sigma_e);
    }
    return acc / static_cast<double>(d.size());
}

double monte_carlo_rho(std::span<const double> d, double sigma_e, std::int64_t n_trials,
                       std::uint64_t seed) {
    if (d.empty()) {
        throw std::invalid_argument("monte_carlo_rho: empty difference vector");
    }
    if (sigma_e <= 0.0) {
        throw std::invalid_argument("monte_carlo_rho: sigma_e must be positive");
    }
    if (n_trials < 1) {
        throw std::invalid_argument("monte_carlo_rho: need at least one trial");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_e);
    const auto sgn = [](double x) { return (x > 0.0) - (x < 0.0); };

    const double inv_h = 1.0 / static_cast<double>(d.size());
    double acc = 0.0;
    for (std::int64_t t = 0; t < n_trials; ++t) {
        int mismatches = 0;
        for (double di : d) {
            const double dhat = di - noise(rng);
            mismatches += sgn(di) != sgn(dhat);
        }
        acc += mismatches * inv_h;
    }
    return acc / static_cast<double>(n_trials);
}

std::vector<double> estimate_lag1_pacf(const SeriesMatrix& series) {
    if (series.rows() < 3) {
        throw std::invalid_argument("estimate_lag1_pacf: need at least 3 rows");
    }
    const int T = series.rows();
    const int N = series.cols();
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);

    for (int j = 0; j < N; ++j) {
        double mean = 0.0;
        for (int t = 0; t < T; ++t) {
            mean += series.at(t, j);
        }
        mean /= T;

        double var = 0.0;
        double cov = 0.0;
        for (int t = 0; t < T; ++t) {
            const double c = series.at(t, j) - mean;
            var += c * c;
            if (t + 1 < T) {
                cov += c * (series.at(t + 1, j) - mean);
            }
        }
        if (var == 0.0) {
            out[j] = 0.0;
            continue;
        }
        double phi = cov / var;
        if (phi > kPacfBound) {
            phi = kPacfBound;
        } else if (phi < -kPacfBound) {
            phi = -kPacfBound;
        }
        out[j] = phi;
    }
    return out;
}

} // namespace tdalign
