#include "doctest.h"

#include "oracles.hpp"
#include "rfm/density.hpp"
#include "rfm/em_dynamic.hpp"
#include "rfm/rng.hpp"
#include "rfm/simulate.hpp"

#include <cmath>
#include <vector>

using namespace rfm;

namespace {

struct TinyInstance {
    Panel panel;
    RegimeParams params;
    MarkovState markov;
    Matrix log_dens;
};

/// Random N=3 instance with J regimes of rank 1, strictly positive chain.
TinyInstance tiny_instance(int t, int j, std::uint64_t seed) {
    Philox rng(seed, 0);
    TinyInstance ti;
    ti.panel.x = oracle::random_matrix(t, 3, rng);
    for (int k = 0; k < j; ++k) ti.params.lambda.push_back(oracle::random_matrix(3, 1, rng));
    ti.params.sigma2 = 0.5 + rng.next_double();
    ti.markov.Q = oracle::random_transition(j, rng);
    ti.markov.phi = oracle::random_simplex(j, rng);
    ti.log_dens = log_density_matrix(ti.panel.x, ti.params);
    return ti;
}

} // namespace

TEST_SUITE("em_dynamic") {

TEST_CASE("filter matches brute-force path enumeration") {
    double worst = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
        const int j = 2 + rep % 2;  // J in {2, 3}
        const int t = 2 + rep % 6;  // T in {2..7}
        const TinyInstance ti = tiny_instance(t, j, 100 + rep);
        const FilterOutput fo = hamilton_filter(ti.panel, ti.params, ti.markov);
        const oracle::ChainPosteriors want = oracle::enumerate_chain(ti.log_dens, ti.markov.Q, ti.markov.phi);
        worst = std::max(worst, (fo.filtered - want.filtered).cwiseAbs().maxCoeff());
        worst = std::max(worst, (fo.predicted - want.predicted).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(fo.cond_loglik.sum() - want.loglik));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("smoother matches brute-force path enumeration") {
    double worst = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
        const int j = 2 + rep % 2;
        const int t = 2 + rep % 6;
        const TinyInstance ti = tiny_instance(t, j, 500 + rep);
        const FilterOutput fo = hamilton_filter(ti.panel, ti.params, ti.markov);
        const ProbSeries sm = smoother(fo, ti.markov);
        const oracle::ChainPosteriors want = oracle::enumerate_chain(ti.log_dens, ti.markov.Q, ti.markov.phi);
        worst = std::max(worst, (sm.marginal - want.smoothed).cwiseAbs().maxCoeff());
        REQUIRE(sm.pairwise.size() == static_cast<std::size_t>(t - 1));
        for (int k = 0; k + 1 < t; ++k)
            worst = std::max(
                worst,
                (sm.pairwise[static_cast<std::size_t>(k)] - want.pairwise[static_cast<std::size_t>(k)])
                    .cwiseAbs()
                    .maxCoeff());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("pairwise probabilities have exact margins") {
    const TinyInstance ti = tiny_instance(7, 3, 9001);
    const ProbSeries sm = smoother(hamilton_filter(ti.panel, ti.params, ti.markov), ti.markov);
    for (std::size_t t = 0; t < sm.pairwise.size(); ++t) {
        const Matrix& pw = sm.pairwise[t];
        // Sum over the destination index recovers the smoothed marginal at t,
        // sum over the source index recovers it at t+1.
        const Vector at_t = pw.colwise().sum().transpose();
        const Vector at_t1 = pw.rowwise().sum();
        CHECK((at_t - sm.marginal.row(static_cast<Eigen::Index>(t)).transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((at_t1 - sm.marginal.row(static_cast<Eigen::Index>(t) + 1).transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
}

TEST_CASE("filter tolerates an absorbing chain, the smoother refuses it") {
    TinyInstance ti = tiny_instance(5, 2, 33);
    ti.markov.Q = Matrix::Identity(2, 2);
    ti.markov.phi.resize(2);
    ti.markov.phi << 1.0, 0.0;

    const FilterOutput fo = hamilton_filter(ti.panel, ti.params, ti.markov);
    CHECK(std::isfinite(fo.cond_loglik.sum()));
    for (int t = 0; t < 5; ++t) {
        CHECK(fo.filtered(t, 0) == doctest::Approx(1.0));
        CHECK(fo.cond_loglik(t) == doctest::Approx(ti.log_dens(t, 0)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(smoother(fo, ti.markov), NumericalError);
}

TEST_CASE("filter underflow surfaces as NumericalError") {
    // Working in log space tolerates astronomically small densities, so the
    // normalizer only vanishes once the quadratic form itself overflows and
    // every regime's log density is -inf. That case must not crash or return
    // garbage; it is reported as a numerical failure.
    TinyInstance ti = tiny_instance(3, 2, 8);
    ti.panel.x = Matrix::Constant(3, 3, 1e160);
    CHECK_THROWS_AS(hamilton_filter(ti.panel, ti.params, ti.markov), NumericalError);
}

TEST_CASE("hamilton_filter_ld is the same filter on a precomputed matrix") {
    const TinyInstance ti = tiny_instance(6, 2, 55);
    const FilterOutput a = hamilton_filter(ti.panel, ti.params, ti.markov, true);
    const FilterOutput b = hamilton_filter_ld(ti.log_dens, ti.markov, true);
    CHECK((a.filtered - b.filtered).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.predicted - b.predicted).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.pairwise.size() == b.pairwise.size());
    for (std::size_t t = 0; t < a.pairwise.size(); ++t)
        CHECK((a.pairwise[t] - b.pairwise[t]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full_markov_loglik equals the enumerated likelihood") {
    const TinyInstance ti = tiny_instance(6, 3, 4242);
    const oracle::ChainPosteriors want = oracle::enumerate_chain(ti.log_dens, ti.markov.Q, ti.markov.phi);
    CHECK(full_markov_loglik(ti.panel, ti.params, ti.markov) ==
          doctest::Approx(want.loglik).epsilon(1e-12));
}

TEST_CASE("estimate_transition normalizes pairwise sums column by column") {
    Philox rng(61, 0);
    ProbSeries probs;
    const int j = 3, t = 9;
    probs.marginal = Matrix::Zero(t, j);
    probs.marginal.row(0) = oracle::random_simplex(j, rng).transpose();
    Matrix total = Matrix::Zero(j, j);
    for (int s = 0; s + 1 < t; ++s) {
        Matrix pw(j, j);
        double mass = 0.0;
        for (int a = 0; a < j; ++a)
            for (int b = 0; b < j; ++b) {
                pw(a, b) = rng.next_double();
                mass += pw(a, b);
            }
        pw /= mass;
        total += pw;
        probs.pairwise.push_back(std::move(pw));
    }
    const MarkovState ms = estimate_transition(probs);
    for (int k = 0; k < j; ++k) {
        const Vector want = total.col(k) / total.col(k).sum();
        CHECK((ms.Q.col(k) - want).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(ms.Q.col(k).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK((ms.phi - probs.marginal.row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);

    // A regime with no outgoing mass cannot be normalized.
    for (auto& pw : probs.pairwise) pw.col(1).setZero();
    CHECK_THROWS_AS(estimate_transition(probs), NumericalError);
    probs.pairwise.clear();
    CHECK_THROWS_AS(estimate_transition(probs), InvalidInput);
}

TEST_CASE("markov helpers build valid chains") {
    const MarkovState u = uniform_markov(3);
    CHECK((u.Q.colwise().sum() - Eigen::RowVectorXd::Ones(3)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(u.phi.sum() == doctest::Approx(1.0));

    const MarkovState m = markov_from_stay({0.95, 0.72});
    CHECK(m.Q(0, 0) == 0.95);
    CHECK(m.Q(1, 0) == doctest::Approx(0.05));
    CHECK(m.Q(1, 1) == 0.72);
    CHECK(m.Q(0, 1) == doctest::Approx(0.28));
    CHECK(m.phi(0) == doctest::Approx(0.5));

    CHECK_THROWS_AS(markov_from_stay({}), InvalidInput);
    CHECK_THROWS_AS(markov_from_stay({0.5, 1.5}), InvalidInput);
    MarkovState bad = uniform_markov(2);
    bad.Q(0, 0) = 0.9;  // column no longer sums to one
    CHECK_THROWS_AS(hamilton_filter_ld(Matrix::Zero(3, 2), bad), InvalidInput);
}

TEST_CASE("fit_dynamic trace is the exact likelihood and is monotone") {
    SimConfig sc;
    sc.n = 20;
    sc.t = 90;
    sc.dgp = 1;
    sc.pattern = 2;
    sc.seed = 7;
    const SimTruth truth = simulate_panel(sc);
    FitConfig cfg;
    cfg.dims = {2, 2};
    cfg.n_trials = 3;
    cfg.seed = 13;
    const MarkovState markov = markov_from_stay({0.9, 0.9});
    const FitResult fit = fit_dynamic(truth.panel, markov, cfg);
    CHECK(fit.converged);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
        CHECK(fit.loglik_trace[i] >=
              fit.loglik_trace[i - 1] - 1e-8 * (1.0 + std::abs(fit.loglik_trace[i - 1])));
    CHECK(full_markov_loglik(truth.panel, fit.params, markov) ==
          doctest::Approx(fit.loglik_trace.back()).epsilon(1e-10));

    // Planted loading spaces are recovered up to rotation on this easy panel.
    const auto r2 = [&](int jt, int jf) {
        return oracle::subspace_r2(truth.loadings[static_cast<std::size_t>(jt)],
                                   fit.params.lambda[static_cast<std::size_t>(jf)]);
    };
    const double best = std::max(std::min(r2(0, 0), r2(1, 1)), std::min(r2(0, 1), r2(1, 0)));
    CHECK(best > 0.85);

    // Smoothed probabilities: rows sum to one, pairwise present.
    const Eigen::Index t = truth.panel.periods();
    CHECK((fit.probs.marginal.rowwise().sum() - Vector::Ones(t)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit.probs.pairwise.size() == static_cast<std::size_t>(t - 1));
}

TEST_CASE("iterate_transition moves the chain toward the truth") {
    SimConfig sc;
    sc.n = 40;
    sc.t = 300;
    sc.dgp = 1;
    sc.pattern = 4;
    sc.seed = 19;
    const SimTruth truth = simulate_panel(sc);
    FitConfig cfg;
    cfg.dims = {2, 2};
    cfg.n_trials = 3;
    cfg.seed = 4;
    cfg.iterate_transition = true;
    const FitResult fit = fit_dynamic(truth.panel, uniform_markov(2), cfg);
    const MarkovState& ms = std::get<MarkovState>(fit.state);
    // True diagonals are 0.95 / 0.72 in some regime order.
    const double hi = std::max(ms.Q(0, 0), ms.Q(1, 1));
    const double lo = std::min(ms.Q(0, 0), ms.Q(1, 1));
    CHECK(hi == doctest::Approx(0.95).epsilon(0.08));
    CHECK(lo == doctest::Approx(0.72).epsilon(0.30));
    CHECK((ms.Q.colwise().sum() - Eigen::RowVectorXd::Ones(2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dynamic fits are independent of the jobs setting") {
    SimConfig sc;
    sc.n = 15;
    sc.t = 60;
    sc.dgp = 3;
    sc.pattern = 2;
    sc.seed = 23;
    const Panel panel = simulate_panel(sc).panel;
    FitConfig cfg;
    cfg.dims = {1, 1};
    cfg.n_trials = 5;
    cfg.seed = 31;
    cfg.jobs = 1;
    const FitResult a = fit_dynamic(panel, markov_from_stay({0.9, 0.8}), cfg);
    cfg.jobs = 3;
    const FitResult b = fit_dynamic(panel, markov_from_stay({0.9, 0.8}), cfg);
    CHECK(a.trial_index == b.trial_index);
    CHECK(a.loglik_trace.back() == b.loglik_trace.back());
    CHECK((a.factors - b.factors).cwiseAbs().maxCoeff() == 0.0);
}

} // TEST_SUITE
