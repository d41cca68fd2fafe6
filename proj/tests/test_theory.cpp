#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "tdalign/theory.hpp"

using namespace tdalign;

TEST_SUITE("theory") {

TEST_CASE("discrepancy and markov core by hand") {
    // H = 2, phi = 0.5, errors both 1:
    //   psi  = (0.25 * 2 - 2 * 0.5) / 0.75 = -2/3
    //   core = 1 + (1 - 0.5)^2 / 0.75     = 4/3
    const std::vector<double> e{1.0, 1.0};
    const std::vector<double> phi{0.5};
    CHECK(discrepancy_psi(e, phi) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
    CHECK(markov_nll_core(e, phi) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("zero pacf leaves no gap") {
    const std::vector<double> e{0.3, -1.2, 2.5, 0.0};
    const std::vector<double> phi{0.0, 0.0, 0.0};
    CHECK(discrepancy_psi(e, phi) == 0.0);
    const double sq = 0.3 * 0.3 + 1.2 * 1.2 + 2.5 * 2.5;
    CHECK(markov_nll_core(e, phi) == doctest::Approx(sq).epsilon(1e-15));
}

TEST_CASE("markov core equals squared error plus the gap on fuzzed inputs") {
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phi_dist(-0.99, 0.99);
    std::uniform_int_distribution<int> h_dist(2, 64);

    for (int inst = 0; inst < 1000; ++inst) {
        const int H = h_dist(rng);
        std::vector<double> e(H);
        std::vector<double> phi(H - 1);
        for (double& v : e) {
            v = normal(rng);
        }
        for (double& v : phi) {
            v = phi_dist(rng);
        }

        double sq = 0.0;
        for (double v : e) {
            sq += v * v;
        }
        const double lhs = markov_nll_core(e, phi);
        const double rhs = sq + discrepancy_psi(e, phi);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("pacf inputs are validated") {
    const std::vector<double> e{1.0, 2.0};
    CHECK_THROWS_AS((void)discrepancy_psi(e, std::vector<double>{0.5, 0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)discrepancy_psi(e, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS((void)markov_nll_core(std::vector<double>{}, std::vector<double>{}),
                    std::invalid_argument);
    CHECK_NOTHROW((void)discrepancy_psi(e, std::vector<double>{0.9999}));
}

TEST_CASE("standard normal cdf reference points") {
    CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std_normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-12));
    CHECK(std_normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-12));
    CHECK(std_normal_cdf(8.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std_normal_cdf(1.3) + std_normal_cdf(-1.3) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("expected inconsistency by hand") {
    // d = [1, 2], sigma = 1: (Phi(-1) + Phi(-2)) / 2
    const std::vector<double> d{1.0, 2.0};
    CHECK(expected_rho(d, 1.0) == doctest::Approx(0.09070269293981813).epsilon(1e-12));

    CHECK_THROWS_AS((void)expected_rho(std::vector<double>{}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)expected_rho(d, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)expected_rho(d, -1.0), std::invalid_argument);
}

TEST_CASE("expected inconsistency grows with the noise level") {
    const std::vector<double> d{0.5, -1.5, 2.0, -0.25};
    double prev = 0.0;
    for (double sigma : {0.1, 0.5, 1.0, 2.0, 8.0}) {
        const double r = expected_rho(d, sigma);
        CHECK(r > prev);
        CHECK(r < 0.5);
        prev = r;
    }
}

TEST_CASE("monte carlo agrees with the closed form and is deterministic") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> d(12);
    for (double& v : d) {
        v = normal(rng);
    }

    const double closed = expected_rho(d, 0.8);
    const double mc_a = monte_carlo_rho(d, 0.8, 400000, 5);
    const double mc_b = monte_carlo_rho(d, 0.8, 400000, 5);
    CHECK(mc_a == mc_b);

    // standard error is below sqrt(0.25 / (H * n)) ~ 2.3e-4; allow 5 sigma
    CHECK(std::abs(mc_a - closed) <= 1.2e-3);

    const double mc_c = monte_carlo_rho(d, 0.8, 400000, 6);
    CHECK(mc_c != mc_a);
}

TEST_CASE("lag-1 autocorrelation estimate recovers an AR(1) coefficient") {
    const SeriesMatrix series = gen_ar1(0.8, 1.0, 20000, 2, 11);
    const std::vector<double> phi = estimate_lag1_pacf(series);
    REQUIRE(phi.size() == 2);
    for (double v : phi) {
        CHECK(std::abs(v - 0.8) < 0.05);
    }
}

TEST_CASE("constant columns report zero autocorrelation") {
    SeriesMatrix series;
    series.values = Matrix(64, 1);
    series.names = {"flat"};
    for (int t = 0; t < 64; ++t) {
        series.at(t, 0) = 3.25;
    }
    const std::vector<double> phi = estimate_lag1_pacf(series);
    CHECK(phi.at(0) == 0.0);

    SeriesMatrix tiny;
    tiny.values = Matrix(2, 1);
    tiny.names = {"flat"};
    CHECK_THROWS_AS((void)estimate_lag1_pacf(tiny), std::invalid_argument);
}

} // TEST_SUITE
