#include "doctest.h"

#include "oracles.hpp"
#include "rfm/density.hpp"
#include "rfm/rng.hpp"
#include "rfm/types.hpp"

#include <cmath>
#include <vector>

using namespace rfm;

TEST_SUITE("density") {

TEST_CASE("reduced form agrees with the dense N x N density") {
    Philox rng(2024, 0);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + static_cast<int>(rng.next_below(19));   // 2..20
        const int r = 1 + static_cast<int>(rng.next_below(std::min(n, 4)));
        const double sigma2 = 0.3 + 2.0 * rng.next_double();
        const Matrix lambda = oracle::random_matrix(n, r, rng);
        const Vector x = oracle::random_matrix(n, 1, rng);
        const double got = regime_log_density(x, lambda, sigma2);
        const double want = oracle::dense_log_density(x, lambda, sigma2);
        worst = std::max(worst, std::abs(got - want));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("closed form for a 1x1 panel") {
    // N=1, r=1: covariance is the scalar lambda^2 + sigma2.
    Vector x(1);
    x << 1.7;
    Matrix lambda(1, 1);
    lambda << 0.9;
    const double v = 0.9 * 0.9 + 0.5;
    const double want = -0.5 * (std::log(2.0 * M_PI * v) + 1.7 * 1.7 / v);
    CHECK(regime_log_density(x, lambda, 0.5) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("log_density_matrix stacks per-regime densities") {
    Philox rng(7, 1);
    const int n = 6, t = 9;
    RegimeParams params;
    params.lambda = {oracle::random_matrix(n, 2, rng), oracle::random_matrix(n, 1, rng)};
    params.sigma2 = 1.3;
    const Matrix x = oracle::random_matrix(t, n, rng);
    const Matrix ld = log_density_matrix(x, params);
    REQUIRE(ld.rows() == t);
    REQUIRE(ld.cols() == 2);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < 2; ++j) {
            const Vector xi = x.row(i).transpose();
            CHECK(ld(i, j) ==
                  doctest::Approx(regime_log_density(xi, params.lambda[j], 1.3)).epsilon(1e-12));
        }
}

TEST_CASE("mixture loglik matches a naive sum on well-scaled input") {
    Philox rng(99, 0);
    const int n = 5, t = 12;
    Panel panel;
    panel.x = oracle::random_matrix(t, n, rng);
    RegimeParams params;
    params.lambda = {oracle::random_matrix(n, 1, rng), oracle::random_matrix(n, 2, rng)};
    params.sigma2 = 0.8;
    Vector q(2);
    q << 0.3, 0.7;

    const Matrix ld = log_density_matrix(panel.x, params);
    long double naive = 0.0L;
    for (int i = 0; i < t; ++i) {
        long double s = 0.0L;
        for (int j = 0; j < 2; ++j) s += (long double)q(j) * std::exp((long double)ld(i, j));
        naive += std::log(s);
    }
    CHECK(mixture_loglik(panel, params, q) ==
          doctest::Approx(static_cast<double>(naive)).epsilon(1e-12));
}

TEST_CASE("mixture loglik survives scales where the naive sum underflows") {
    // Densities near exp(-4000) flush to zero termwise; the log-sum-exp
    // path must still return the exact dominant term plus the correction.
    Philox rng(5, 5);
    const int n = 4, t = 3;
    Panel panel;
    panel.x = 40.0 * oracle::random_matrix(t, n, rng);
    RegimeParams params;
    params.lambda = {oracle::random_matrix(n, 1, rng), oracle::random_matrix(n, 1, rng)};
    params.sigma2 = 1e-3;
    Vector q(2);
    q << 0.5, 0.5;

    const double ll = mixture_loglik(panel, params, q);
    CHECK(std::isfinite(ll));

    const Matrix ld = log_density_matrix(panel.x, params);
    double want = 0.0;
    for (int i = 0; i < t; ++i) {
        const double m = std::max(ld(i, 0), ld(i, 1));
        want += m + std::log(0.5 * std::exp(ld(i, 0) - m) + 0.5 * std::exp(ld(i, 1) - m));
    }
    CHECK(ll == doctest::Approx(want).epsilon(1e-12));
}

} // TEST_SUITE
