#pragma once

#include "rfm/rng.hpp"
#include "rfm/types.hpp"

#include <cstdint>
#include <optional>

namespace rfm {

/* Synthetic panels: x_it = f_t' lambda_{z_t, i} + e_it with AR(1) factors,
 * AR(1) idiosyncratic errors with Toeplitz cross-sectional covariance
 * Omega_ij = beta^|i-j|, and loadings calibrated to a target regression R^2.
 *
 * DGP 1: two factors, both loading columns switch between regimes.
 * DGP 2: two factors, first column shared across regimes, second switches.
 * DGP 3: one factor, scalar loadings switch.
 *
 * Regime patterns: 1 = postwar NBER expansion/recession quarters (T=300),
 * 2 = one break at floor(T/2), 3 = regime 2 on (floor(T/3), floor(2T/3)],
 * 4 = Markov chain with stay probabilities 0.95 / 0.72.
 */

struct SimConfig {
    int n = 100;
    int t = 300;
    int dgp = 3;
    int pattern = 2;
    double rho = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double r2 = 0.5;
    std::uint64_t seed = 0;
    std::optional<std::string> label_file;  // pattern-1 override, one label per line
};

struct PatternMeta {
    std::vector<int> breaks;   // patterns 2/3: 0-based first periods of each new segment
    Matrix q0;                 // pattern 4: true transition matrix
    std::string source;        // pattern 1: provenance of the label sequence
};

struct SimTruth {
    Panel panel;
    Matrix factors;                 // T x r
    std::vector<Matrix> loadings;   // per regime, N x r
    std::vector<int> states;        // 0-based regime labels
    PatternMeta meta;
    SimConfig config;
};

Matrix gen_factors(int t, int r, double rho, Philox& rng);

Matrix gen_errors(int t, int n, double alpha, double beta, Philox& rng);

/// Two regimes of loadings per the DGP. Per-entry variance is
/// (1-rho^2)/(1-alpha^2) * 2 R^2/(1-R^2) for DGPs 1-2 and
/// (1-rho^2)/(1-alpha^2) * R^2/(1-R^2) for DGP 3.
std::vector<Matrix> gen_loadings(int n, int dgp, double rho, double alpha, double r2,
                                 Philox& rng);

std::pair<std::vector<int>, PatternMeta> gen_states(int t, int pattern, Philox& rng,
                                                    const std::optional<std::string>& label_file = {});

SimTruth simulate_panel(const SimConfig& config);

/// The embedded quarterly recession indicator 1945Q2-2020Q1 (300 quarters,
/// 45 recession quarters). Provenance documented next to the shipped CSV.
const std::vector<int>& nber_quarterly_labels();

/// Labels for the same range as "YYYYQq" strings, aligned with the above.
std::vector<std::string> nber_quarter_names();

} // namespace rfm
