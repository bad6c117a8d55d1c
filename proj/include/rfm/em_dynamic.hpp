#pragma once

#include "rfm/em_static.hpp"
#include "rfm/types.hpp"

namespace rfm {

/* Markov-state machinery.
 *
 * Filter:   p_t|t,j  proportional to  L(x_t | z_t=j) * [Q p_{t-1|t-1}]_j,
 *           seeded by phi at t=1, normalized per period in log space.
 * Smoother: the O(T J^2) backward identity
 *           p_t|T,k = p_t|t,k * sum_j Q_jk (p_{t+1|T,j} / p_{t+1|t,j}),
 * with pairwise smoothed probabilities
 *           p_t,jk|T = Q_jk p_{t-1|t-1,k} p_t|T,j / p_t|t-1,j.
 * Both margins of the pairwise array are exact: summing over k gives the
 * smoothed marginal at t, summing over j gives it at t-1.
 */

struct FilterOutput {
    Matrix filtered;               // T x J, p_tj|t
    Matrix predicted;              // T x J, p_tj|t-1; row 0 is phi
    Vector cond_loglik;            // log L(x_t | x_{1:t-1})
    std::vector<Matrix> pairwise;  // optional, T-1 entries, p_tjk|t
};

FilterOutput hamilton_filter(const Panel& panel, const RegimeParams& params,
                             const MarkovState& markov, bool want_pairwise = false);

/// Filter on a precomputed T x J log-density matrix (the EM loop reuses it).
FilterOutput hamilton_filter_ld(const Matrix& log_dens, const MarkovState& markov,
                                bool want_pairwise = false);

/// Backward smoother; returns marginal and pairwise smoothed probabilities.
ProbSeries smoother(const FilterOutput& filter_out, const MarkovState& markov);

/// EM with smoothed weights. markov supplies the (Q, phi) used by the
/// filter/smoother; empty matrices mean uniform. Restart semantics match
/// fit_static; the trace holds the exact Markov log likelihood.
FitResult fit_dynamic(const Panel& panel, const MarkovState& markov, const FitConfig& config);

/// Qtilde_jk = sum_t pairwise[t](j,k) / column totals; phitilde = smoothed
/// marginal of the first period.
MarkovState estimate_transition(const ProbSeries& probs);

/// Same reduced GLS formula as the static version with smoothed weights.
Matrix estimate_factors_dynamic(const Panel& panel, const RegimeParams& params,
                                const ProbSeries& probs);

/// Uniform Q and phi for J regimes.
MarkovState uniform_markov(int j);

/// J=2 convenience: diagonal stay probabilities, off-diagonals complete the
/// columns; phi defaults to uniform.
MarkovState markov_from_stay(const std::vector<double>& stay,
                             const Vector& phi = Vector());

} // namespace rfm
