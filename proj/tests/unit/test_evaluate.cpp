#include "doctest.h"

#include "oracles.hpp"
#include "rfm/em_dynamic.hpp"
#include "rfm/evaluate.hpp"
#include "rfm/rng.hpp"

#include <cmath>
#include <vector>

using namespace rfm;

namespace {

/// Hand-built truth/fit pair with indicator probabilities; the fit reuses
/// the true loadings unless the caller perturbs it afterwards.
struct Pair {
    SimTruth truth;
    FitResult fit;
};

Pair make_pair(int n, int t, std::vector<int> dims, std::uint64_t seed) {
    Philox rng(seed, 0);
    Pair p;
    const int j = static_cast<int>(dims.size());
    int rmax = 0;
    for (int r : dims) rmax = std::max(rmax, r);
    p.truth.factors = oracle::random_matrix(t, rmax, rng);
    p.truth.states.resize(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) p.truth.states[static_cast<std::size_t>(i)] = (i * j) / t;
    for (int r : dims) p.truth.loadings.push_back(oracle::random_matrix(n, r, rng));
    p.truth.panel.x = Matrix::Zero(t, n);  // only the period count is used here

    p.fit.params.lambda = p.truth.loadings;
    p.fit.params.sigma2 = 1.0;
    p.fit.probs.marginal = Matrix::Zero(t, j);
    for (int i = 0; i < t; ++i)
        p.fit.probs.marginal(i, p.truth.states[static_cast<std::size_t>(i)]) = 1.0;
    p.fit.factors = p.truth.factors;
    p.fit.state = StaticState{Vector::Constant(j, 1.0 / j)};
    return p;
}

} // namespace

TEST_SUITE("evaluate") {

TEST_CASE("match_labels undoes a column shuffle") {
    Pair p = make_pair(6, 30, {1, 1, 1}, 5);
    const std::vector<int> perm = {2, 0, 1};  // fitted column of each true regime
    Matrix shuffled(30, 3);
    for (int k = 0; k < 3; ++k) shuffled.col(perm[static_cast<std::size_t>(k)]) =
        p.fit.probs.marginal.col(k);
    CHECK(match_labels(shuffled, p.truth.states) == perm);
    CHECK(match_labels(p.fit.probs.marginal, p.truth.states) == std::vector<int>{0, 1, 2});
}

TEST_CASE("apply_permutation reorders every regime-indexed field") {
    Pair p = make_pair(5, 12, {2, 1}, 8);
    FitResult fit = p.fit;
    fit.probs.pairwise.assign(11, (Matrix(2, 2) << 0.1, 0.2, 0.3, 0.4).finished());
    fit.state = MarkovState{(Matrix(2, 2) << 0.9, 0.3, 0.1, 0.7).finished(),
                            (Vector(2) << 0.8, 0.2).finished()};
    FitResult swapped = fit;
    apply_permutation(swapped, {1, 0});

    CHECK((swapped.params.lambda[0] - fit.params.lambda[1]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((swapped.probs.marginal.col(0) - fit.probs.marginal.col(1)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(swapped.probs.pairwise[0](0, 0) == 0.4);
    CHECK(swapped.probs.pairwise[0](0, 1) == 0.3);
    const MarkovState& ms = std::get<MarkovState>(swapped.state);
    CHECK(ms.Q(0, 0) == 0.7);
    CHECK(ms.Q(1, 1) == 0.9);
    CHECK(ms.phi(0) == 0.2);
    // Applying the permutation twice is the identity for a transposition.
    apply_permutation(swapped, {1, 0});
    CHECK((swapped.probs.marginal - fit.probs.marginal).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::get<MarkovState>(swapped.state).Q(0, 0) == 0.9);
}

TEST_CASE("compute_rotations matches the closed formulas") {
    Pair p = make_pair(7, 20, {2, 2}, 13);
    Philox rng(14, 0);
    p.fit.params.lambda[0] += 0.1 * oracle::random_matrix(7, 2, rng);
    p.fit.params.sigma2 = 1.3;
    const RotationSet rot = compute_rotations(p.truth, p.fit);

    for (int k = 0; k < 2; ++k) {
        const Matrix& lhat = p.fit.params.lambda[static_cast<std::size_t>(k)];
        const double pbar = p.fit.probs.marginal.col(k).mean();
        const Matrix w_want =
            (lhat.transpose() * lhat / 7.0 + 1.3 / 7.0 * Matrix::Identity(2, 2)) * pbar;
        CHECK((rot.w[static_cast<std::size_t>(k)] - w_want).cwiseAbs().maxCoeff() < 1e-12);

        Matrix sf = Matrix::Zero(2, 2);
        for (int i = 0; i < 20; ++i)
            if (p.truth.states[static_cast<std::size_t>(i)] == k)
                sf += p.truth.factors.row(i).transpose() * p.truth.factors.row(i);
        sf /= 20.0;
        const Matrix h_want =
            sf * (p.truth.loadings[static_cast<std::size_t>(k)].transpose() * lhat / 7.0) *
            w_want.inverse();
        CHECK((rot.h[static_cast<std::size_t>(k)] - h_want).cwiseAbs().maxCoeff() < 1e-10);
    }

    // A regime the fit never visits makes W singular.
    p.fit.probs.marginal.col(1).setZero();
    CHECK_THROWS_AS(compute_rotations(p.truth, p.fit), NumericalError);
}

TEST_CASE("r2_loading_space is a subspace statistic") {
    Pair p = make_pair(10, 6, {3, 2}, 21);
    Philox rng(3, 3);

    // Exactly one when the fitted space equals the true space.
    Matrix mix(3, 3);
    do {
        mix = oracle::random_matrix(3, 3, rng);
    } while (std::abs(mix.determinant()) < 0.1);
    p.fit.params.lambda[0] = p.truth.loadings[0] * mix;
    CHECK(r2_loading_space(p.truth, p.fit, 0) == doctest::Approx(1.0).epsilon(1e-10));

    // Invariant to any further invertible right-multiplication.
    FitResult other = p.fit;
    other.params.lambda[0] = p.fit.params.lambda[0] * mix.transpose();
    CHECK(r2_loading_space(p.truth, other, 0) ==
          doctest::Approx(r2_loading_space(p.truth, p.fit, 0)).epsilon(1e-12));

    // Matches the independent canonical-cosine computation on a sloppy fit.
    p.fit.params.lambda[1] = p.truth.loadings[1] + 0.7 * oracle::random_matrix(10, 2, rng);
    CHECK(r2_loading_space(p.truth, p.fit, 1) ==
          doctest::Approx(oracle::subspace_r2(p.truth.loadings[1], p.fit.params.lambda[1]))
              .epsilon(1e-10));

    // Zero for an orthogonal complement: loadings on disjoint coordinates.
    p.truth.loadings[1] = Matrix::Zero(10, 2);
    p.truth.loadings[1](0, 0) = 1.0;
    p.truth.loadings[1](1, 1) = 1.0;
    p.fit.params.lambda[1] = Matrix::Zero(10, 2);
    p.fit.params.lambda[1](2, 0) = 1.0;
    p.fit.params.lambda[1](3, 1) = 1.0;
    CHECK(r2_loading_space(p.truth, p.fit, 1) == doctest::Approx(0.0));

    // Rank-deficient input is rejected.
    p.fit.params.lambda[1].col(1) = 2.0 * p.fit.params.lambda[1].col(0);
    CHECK_THROWS_AS(r2_loading_space(p.truth, p.fit, 1), InvalidInput);
    CHECK_THROWS_AS(r2_loading_space(p.truth, p.fit, 7), InvalidInput);
}

TEST_CASE("factor R2 agrees with an explicit regression") {
    Pair p = make_pair(6, 40, {2, 2}, 31);
    Philox rng(9, 9);
    p.fit.factors = p.truth.factors * oracle::random_matrix(2, 2, rng) +
                    0.3 * oracle::random_matrix(40, 2, rng);
    const double got = r2_factors(p.truth, p.fit, false);
    CHECK(got == doctest::Approx(oracle::uncentered_r2(p.truth.factors, p.fit.factors))
                     .epsilon(1e-12));
    CHECK(got < 1.0);

    // When the fitted factors equal the rotated truth the regression is exact.
    Pair clean = make_pair(6, 40, {2, 2}, 32);
    const RotationSet rot = compute_rotations(clean.truth, clean.fit);
    for (int i = 0; i < 40; ++i) {
        const int z = clean.truth.states[static_cast<std::size_t>(i)];
        const Vector f0 = clean.truth.factors.row(i).transpose();
        clean.fit.factors.row(i) =
            rot.h[static_cast<std::size_t>(z)].partialPivLu().solve(f0).transpose();
    }
    CHECK(r2_factors(clean.truth, clean.fit, true, &rot) ==
          doctest::Approx(1.0).epsilon(1e-10));
    // Recomputing the rotations inside gives the same answer.
    CHECK(r2_factors(clean.truth, clean.fit, true) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("classification_report on a hand-traced series") {
    SimTruth truth;
    truth.states = {0, 0, 1, 1, 0};
    Matrix marginal(5, 2);
    marginal << 1.0, 0.0, 1.0, 0.0, 0.05, 0.95, 0.05, 0.95, 0.95, 0.05;
    const ClassificationReport rep = classification_report(truth, marginal);
    CHECK(rep.mean_abs_error == doctest::Approx(0.03));
    CHECK(rep.sup_abs_error == doctest::Approx(0.05));
    CHECK(rep.per_t_labels == std::vector<int>{0, 0, 1, 1, 0});
    CHECK(rep.misclassified_spans.empty());
    CHECK(rep.false_positive_spans == 0);

    // A spurious spike is one false-positive span and one misclassified run.
    SimTruth flat;
    flat.states = std::vector<int>(8, 0);
    Matrix spike = Matrix::Zero(8, 2);
    spike.col(0).setOnes();
    for (int i : {3, 4}) {
        spike(i, 1) = 0.97;
        spike(i, 0) = 0.03;
    }
    const ClassificationReport rep2 = classification_report(flat, spike);
    CHECK(rep2.false_positive_spans == 1);
    REQUIRE(rep2.misclassified_spans.size() == 1);
    CHECK(rep2.misclassified_spans[0] == std::pair<int, int>{3, 4});

    CHECK_THROWS_AS(classification_report(flat, spike, 0.1, 0.9), InvalidInput);
}

TEST_CASE("classification errors are invariant to a joint relabeling") {
    Pair p = make_pair(4, 25, {1, 1}, 44);
    Philox rng(4, 1);
    Matrix marginal(25, 2);
    for (int i = 0; i < 25; ++i) {
        marginal(i, 0) = rng.next_double();
        marginal(i, 1) = 1.0 - marginal(i, 0);
    }
    const ClassificationReport a = classification_report(p.truth, marginal);

    SimTruth flipped = p.truth;
    for (int& z : flipped.states) z = 1 - z;
    Matrix swapped(25, 2);
    swapped.col(0) = marginal.col(1);
    swapped.col(1) = marginal.col(0);
    const ClassificationReport b = classification_report(flipped, swapped);
    CHECK(a.mean_abs_error == doctest::Approx(b.mean_abs_error).epsilon(1e-12));
    CHECK(a.sup_abs_error == doctest::Approx(b.sup_abs_error).epsilon(1e-12));
    CHECK(a.false_positive_spans >= 0);
}

TEST_CASE("sample moments match naive accumulation") {
    Philox rng(55, 0);
    Vector v(400);
    for (int i = 0; i < 400; ++i) v(i) = rng.next_normal() + 0.3 * rng.next_double();
    CHECK(skewness(v) == doctest::Approx(oracle::naive_skewness(v)).epsilon(1e-12));
    CHECK(excess_kurtosis(v) == doctest::Approx(oracle::naive_excess_kurtosis(v)).epsilon(1e-12));

    Vector big(200000);
    Philox rng2(56, 0);
    for (Eigen::Index i = 0; i < big.size(); ++i) big(i) = rng2.next_normal();
    CHECK(std::abs(skewness(big)) < 0.02);
    CHECK(std::abs(excess_kurtosis(big)) < 0.05);

    Vector two(2);
    two << 1.0, 2.0;
    CHECK_THROWS_AS(skewness(two), InvalidInput);
    Vector three = Vector::Ones(3);
    CHECK_THROWS_AS(skewness(three), NumericalError);  // zero variance
    CHECK_THROWS_AS(excess_kurtosis(three), InvalidInput);  // needs n >= 4
}

TEST_CASE("standardized_estimates standardizes and validates") {
    const int reps = 40, n = 6, t = 8;
    std::vector<SimTruth> truths;
    std::vector<FitResult> fits;
    for (int r = 0; r < reps; ++r) {
        Pair p = make_pair(n, t, {1, 1}, 100 + static_cast<std::uint64_t>(r));
        Philox rng(200 + static_cast<std::uint64_t>(r), 1);
        p.fit.params.lambda[0] += 0.05 * oracle::random_matrix(n, 1, rng);
        p.fit.params.lambda[1] += 0.05 * oracle::random_matrix(n, 1, rng);
        p.fit.factors += 0.05 * oracle::random_matrix(t, 1, rng);
        truths.push_back(std::move(p.truth));
        fits.push_back(std::move(p.fit));
    }
    const StandardizedSample s = standardized_estimates(fits, truths);
    REQUIRE(s.loading_errors.size() == 2);
    REQUIRE(s.loading_errors[0].rows() == reps);
    REQUIRE(s.factor_errors.rows() == reps);
    for (const Matrix& m : {s.loading_errors[0], s.loading_errors[1], s.factor_errors})
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            CHECK(std::abs(m.col(c).mean()) < 1e-12);
            const double sd = std::sqrt(m.col(c).squaredNorm() / (reps - 1) -
                                        0.0);  // mean is zero after centering
            CHECK(sd == doctest::Approx(1.0).epsilon(1e-10));
        }

    std::vector<SimTruth> few(truths.begin(), truths.begin() + 10);
    std::vector<FitResult> few_fits(fits.begin(), fits.begin() + 10);
    CHECK_THROWS_AS(standardized_estimates(few_fits, few), InvalidInput);

    // Identical fits have zero cross-replication variance.
    std::vector<FitResult> frozen(static_cast<std::size_t>(reps), fits[0]);
    std::vector<SimTruth> frozen_truth(static_cast<std::size_t>(reps), truths[0]);
    CHECK_THROWS_AS(standardized_estimates(frozen, frozen_truth), NumericalError);
}

TEST_CASE("run_cell smoke: metrics live in their ranges") {
    Table1Cell cell;
    cell.sim.n = 40;
    cell.sim.t = 120;
    cell.sim.dgp = 1;
    cell.sim.pattern = 2;
    cell.sim.seed = 7;
    cell.reps = 3;
    cell.trials = 3;
    const Table1Row row = run_cell(cell, 2);
    for (double v : {row.r2_l1, row.r2_l2, row.r2_f, row.r2_hf}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
    }
    CHECK(row.class_mean >= 0.0);
    CHECK(row.class_mean <= 1.0);
    CHECK(row.class_sup <= 1.0 + 1e-12);
    CHECK(row.q11_err == -1.0);  // not applicable outside patterns 1 and 4
    CHECK(row.q22_err == -1.0);
    CHECK(row.failures == 0);

    // The grid runner is a plain map over cells.
    const std::vector<Table1Row> rows = table1_run({cell}, 2);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].r2_l1 == doctest::Approx(row.r2_l1));
}

TEST_CASE("rotation residual shrinks along the asymptotic path") {
    // Monte Carlo mean of ||Lhat_j - L0_j H_j||_F / sqrt(N) over a growing
    // (N, T) ladder; the rate theory says it falls.
    const std::vector<std::pair<int, int>> sizes = {{50, 150}, {100, 300}, {200, 300}};
    std::vector<double> mean_resid;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        double acc = 0.0;
        const int reps = 3;
        for (int rep = 0; rep < reps; ++rep) {
            SimConfig sc;
            sc.n = sizes[s].first;
            sc.t = sizes[s].second;
            sc.dgp = 1;
            sc.pattern = 2;
            sc.seed = 900 + static_cast<std::uint64_t>(rep);
            const SimTruth truth = simulate_panel(sc);
            FitConfig fc;
            fc.dims = {2, 2};
            fc.n_trials = 5;
            fc.seed = 17 + static_cast<std::uint64_t>(rep);
            fc.sigma2 = Sigma2Mode::Fixed(1.0);
            fc.jobs = 2;
            FitResult fit = fit_dynamic(truth.panel, markov_from_stay({0.95, 0.72}), fc);
            apply_permutation(fit, match_labels(fit.probs.marginal, truth.states));
            const RotationSet rot = compute_rotations(truth, fit);
            for (int j = 0; j < 2; ++j)
                acc += (fit.params.lambda[static_cast<std::size_t>(j)] -
                        truth.loadings[static_cast<std::size_t>(j)] *
                            rot.h[static_cast<std::size_t>(j)])
                           .norm() /
                       std::sqrt(static_cast<double>(sc.n)) / 2.0;
        }
        mean_resid.push_back(acc / reps);
    }
    CHECK(mean_resid[1] < mean_resid[0]);
    CHECK(mean_resid[2] < mean_resid[1]);
}

} // TEST_SUITE
