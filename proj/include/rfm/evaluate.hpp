#pragma once

#include "rfm/em_static.hpp"
#include "rfm/simulate.hpp"
#include "rfm/types.hpp"

namespace rfm {

/// Per-regime rotation matrices linking estimates to truth:
///   W_j = (Lhat_j'Lhat_j/N + sigma2/N I) * mean_t(p_tj)
///   H_j = (T^{-1} sum_t f_t f_t' 1{z_t=j}) (L0_j'Lhat_j/N) W_j^{-1}
struct RotationSet {
    std::vector<Matrix> w;
    std::vector<Matrix> h;
};

/// Permutation matching fitted regimes to true ones: perm[k] is the fitted
/// column assigned to true regime k, maximizing sum_t probs(t, perm[z_t]).
std::vector<int> match_labels(const Matrix& marginal, const std::vector<int>& states);

/// Reorder every regime-indexed field of a fit so column k means true
/// regime k. Factors are left alone (they are already probability-mixed).
void apply_permutation(FitResult& fit, const std::vector<int>& perm);

RotationSet compute_rotations(const SimTruth& truth, const FitResult& fit);

/// Uncentered projection R^2 of the estimated loading space on the true one:
/// span(Lhat_j) is orthonormalized and projected onto span(L0_j), giving the
/// mean squared canonical-angle cosine. Exactly invariant to
/// right-multiplication of Lhat_j by any invertible matrix; 1 iff the spaces
/// coincide, 0 iff they are orthogonal.
double r2_loading_space(const SimTruth& truth, const FitResult& fit, int j);

/// rotated=false: uncentered R^2 of the estimated factor series on the true
/// one. rotated=true: on the regime-rotated targets H_{z_t}^{-1} f_t.
double r2_factors(const SimTruth& truth, const FitResult& fit, bool rotated,
                  const RotationSet* rot = nullptr);

struct ClassificationReport {
    double mean_abs_error = 0.0;
    double sup_abs_error = 0.0;
    int false_positive_spans = 0;                 // labeled 2 where truth is 1
    std::vector<int> per_t_labels;                // hysteresis-rule labels
    std::vector<std::pair<int, int>> misclassified_spans;  // [first, last] inclusive
};

ClassificationReport classification_report(const SimTruth& truth, const Matrix& marginal,
                                           double enter = 0.9, double exit = 0.1);

/// Cross-replication standardized estimation errors for histogramming.
/// Loading errors are taken at series index N/2 (per regime), factor errors
/// at period T/2; each is aligned by the replication's rotation first.
struct StandardizedSample {
    std::vector<Matrix> loading_errors;  // per regime: reps x r, standardized per column
    Matrix factor_errors;                // reps x r, standardized per column
};

StandardizedSample standardized_estimates(const std::vector<FitResult>& fits,
                                          const std::vector<SimTruth>& truths);

double skewness(const Vector& sample);
double excess_kurtosis(const Vector& sample);

/// One Monte Carlo cell of the simulation study.
struct Table1Cell {
    SimConfig sim;                 // per-replication seeds derive from sim.seed
    bool smoothed = true;
    int reps = 5;
    int trials = 5;
    Sigma2Mode sigma2 = Sigma2Mode::Fixed(1.0);
    std::vector<double> stay = {0.95, 0.72};  // filter Q diagonal (smoothed runs)
};

struct Table1Row {
    Table1Cell cell;
    double r2_l1 = 0, r2_l2 = 0, r2_f = 0, r2_hf = 0;
    double class_mean = 0, class_sup = 0;
    double q11_err = -1, q22_err = -1;  // negative = not applicable
    int failures = 0;
};

Table1Row run_cell(const Table1Cell& cell, int jobs);
std::vector<Table1Row> table1_run(const std::vector<Table1Cell>& grid, int jobs);

} // namespace rfm
