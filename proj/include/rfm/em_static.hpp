#pragma once

#include "rfm/types.hpp"

#include <cstdint>
#include <optional>

namespace rfm {

/// Idiosyncratic-variance handling in the M-step.
struct Sigma2Mode {
    bool fixed = false;
    double value = 1.0;   // used when fixed
    double clamp_c = 10.0;  // estimate restricted to [1/C^2, C^2]

    static Sigma2Mode Fixed(double v) { return {true, v, 10.0}; }
    static Sigma2Mode Estimated(double c = 10.0) { return {false, 1.0, c}; }
};

struct FitConfig {
    std::vector<int> dims;          // r_j per regime
    double tol = 1e-7;              // relative loglik change
    int max_iter = 500;
    int n_trials = 30;
    std::uint64_t seed = 0;
    int jobs = 1;
    Sigma2Mode sigma2 = Sigma2Mode::Estimated();
    bool iterate_q = false;         // re-estimate q each iteration (static)
    bool iterate_transition = false; // re-estimate (Q, phi) each iteration (dynamic)

    // Warm starts, applied to trial 0 only. init_probs triggers an M-step
    // before the first E-step (the realtime pipeline seeds labels this way).
    std::optional<RegimeParams> init_params;
    std::optional<Matrix> init_probs;
};

/// Per-trial diagnostics surfaced on total failure.
struct TrialDiag {
    int trial = -1;
    double loglik = -std::numeric_limits<double>::infinity();
    bool degenerate = false;
    bool converged = false;
    int iterations = 0;
};

/// Posterior regime probabilities, Eq.-(m) form. pairwise stays empty.
ProbSeries e_step_static(const Panel& panel, const RegimeParams& params, const Vector& q);

/// S = sum_t w_t x_t x_t' / sum_t w_t.
Matrix weighted_covariance(const Matrix& x, const Vector& weights);

/// Loadings from the top-r eigenpairs of S: column l is the eigenvector for
/// the l-th largest eigenvalue mu_l scaled to norm sqrt(max(mu_l - sigma2,
/// eps_floor)), eps_floor = 1e-8. Columns ordered by non-increasing norm;
/// each column's largest-magnitude entry is nonnegative.
Matrix m_step_loadings(const Matrix& s, int r, double sigma2);

/// Trace update sigma2 = (1/N) tr((1/T) sum_t x_t x_t' - sum_j qbar_j
/// Lambda_j Lambda_j') with qbar_j the column means of weights, clamped to
/// [1/C^2, C^2]. Serves both the static and the smoothed M-step.
double sigma2_update(const Matrix& x, const std::vector<Matrix>& loadings,
                     const Matrix& weights, double clamp_c = 10.0);

struct MStepInfo {
    int inner_iterations = 0;   // m_step_loadings passes per regime
    double sigma2_delta = 0.0;  // last inner-step change
};

/// Full M-step: per-regime weighted covariance, then the loadings/sigma2
/// fixed point (|delta sigma2| < 1e-8 or 100 inner rounds; a fixed sigma2
/// needs exactly one loadings pass).
RegimeParams m_step(const Matrix& x, const Matrix& weights, const std::vector<int>& dims,
                    const Sigma2Mode& mode, double sigma2_start = 1.0,
                    MStepInfo* info = nullptr);

/// EM for the static (unsmoothed) model. q empty means uniform. Runs
/// config.n_trials random restarts and returns the best likelihood; trials
/// are independent streams, so results do not depend on config.jobs.
FitResult fit_static(const Panel& panel, const Vector& q, const FitConfig& config);

/// qhat_j = column means of the posterior probabilities.
Vector estimate_q(const ProbSeries& probs);

/// Posterior-weighted factor estimate, reduced GLS form
/// f_t = sum_j p_tj (sigma2 I + Lambda_j'Lambda_j)^{-1} Lambda_j' x_t,
/// zero-padded to max_j r_j columns.
Matrix estimate_factors_static(const Panel& panel, const RegimeParams& params,
                               const ProbSeries& probs);

} // namespace rfm
