#pragma once

#include "rfm/types.hpp"

namespace rfm {

/* Gaussian regime density in reduced form.
 *
 * Under regime j the observation is x_t ~ N(0, Lambda_j Lambda_j' + sigma2 I_N).
 * With A = sigma2 I_r + Lambda'Lambda (r x r, SPD) the log density is
 *
 *   -(N/2) log 2pi - (1/2)[(N - r) log sigma2 + log|A|]
 *   - (1/(2 sigma2)) [ ||x||^2 - x'Lambda A^{-1} Lambda'x ]
 *
 * so only r-dimensional SPD solves appear; no N x N matrix is ever formed.
 */

/// Log density of one observation under one regime.
double regime_log_density(const Vector& x, const Matrix& lambda, double sigma2);

/// T x J matrix of regime log densities for a whole sample. The per-regime
/// factorization is shared across periods; this is the kernel every E-step
/// and filter call sits on.
Matrix log_density_matrix(const Matrix& x, const RegimeParams& params);

/// Static mixture log likelihood: sum_t log sum_j q_j L_tj, via log-sum-exp.
double mixture_loglik(const Panel& panel, const RegimeParams& params, const Vector& q);

/// Exact Markov-model log likelihood sum_t log L(x_t | x_{1:t-1}), evaluated
/// through the forward filter. Defined in em_dynamic.cpp.
double full_markov_loglik(const Panel& panel, const RegimeParams& params,
                          const MarkovState& markov);

namespace detail {

/// Row-wise log-sum-exp of lm + log(weights) (weights broadcast across rows).
/// Writes normalized posteriors into probs when non-null; returns the total.
double logsumexp_rows(const Matrix& lm, const Vector& weights, Matrix* probs);

} // namespace detail

} // namespace rfm
