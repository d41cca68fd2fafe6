#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tdalign/series.hpp"

namespace tdalign {

/**
 * Closed-form gap between the pointwise squared error and the lag-1 Markov
 * negative log-likelihood of the forecast errors:
 *
 *   psi = sum_{i=2..H} (phi_i^2 (e_i^2 + e_{i-1}^2) - 2 phi_i e_i e_{i-1}) / (1 - phi_i^2)
 *
 * `errors` holds e_1..e_H; `pacf` holds phi_2..phi_H (one per consecutive
 * pair), each strictly inside (-1, 1).
 */
double discrepancy_psi(std::span<const double> errors, std::span<const double> pacf);

/**
 * Parameter-dependent part of the lag-1 Markov Gaussian NLL of the errors:
 *
 *   e_1^2 + sum_{i=2..H} (e_i - phi_i e_{i-1})^2 / (1 - phi_i^2)
 *
 * Constant offsets and the overall noise scale are dropped, so the identity
 * markov_nll_core = sum e_i^2 + discrepancy_psi holds exactly.
 */
double markov_nll_core(std::span<const double> errors, std::span<const double> pacf);

/** Standard normal CDF via erfc. */
double std_normal_cdf(double x);

/**
 * Expected sign-inconsistency ratio when each predicted difference equals the
 * true difference d_i minus N(0, sigma_e^2) noise:
 *
 *   (1/H) sum_i Phi(-|d_i| / sigma_e)
 */
double expected_rho(std::span<const double> d, double sigma_e);

/** Monte Carlo estimate of the same quantity; deterministic in the seed. */
double monte_carlo_rho(std::span<const double> d, double sigma_e, std::int64_t n_trials,
                       std::uint64_t seed);

/**
 * Lag-1 sample autocorrelation per column, clamped into
 * [-1 + 1e-6, 1 - 1e-6]; constant columns report 0.
 */
std::vector<double> estimate_lag1_pacf(const SeriesMatrix& series);

} // namespace tdalign
