#include "rfm/em_dynamic.hpp"

#include "rfm/density.hpp"
#include "rfm/parallel.hpp"
#include "rfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rfm {
namespace {

constexpr double kDivGuard = 1e-300;
constexpr double kEmptyRegime = 1e-12;

void validate_markov(const MarkovState& markov, int j_count) {
    if (markov.Q.rows() != j_count || markov.Q.cols() != j_count)
        throw InvalidInput("markov: Q must be J x J");
    if (markov.phi.size() != j_count) throw InvalidInput("markov: phi must have length J");
    if ((markov.Q.array() < 0.0).any() || (markov.phi.array() < 0.0).any())
        throw InvalidInput("markov: negative probability");
    for (int k = 0; k < j_count; ++k)
        if (std::abs(markov.Q.col(k).sum() - 1.0) > 1e-8)
            throw InvalidInput("markov: column " + std::to_string(k + 1) + " of Q does not sum to 1");
    if (std::abs(markov.phi.sum() - 1.0) > 1e-8)
        throw InvalidInput("markov: phi does not sum to 1");
}

struct DynamicTrial {
    RegimeParams params;
    ProbSeries probs;
    MarkovState markov;
    std::vector<double> trace;
    bool converged = false;
    bool degenerate = false;
    std::string note;
};

} // namespace

MarkovState uniform_markov(int j) {
    return {Matrix::Constant(j, j, 1.0 / j), Vector::Constant(j, 1.0 / j)};
}

MarkovState markov_from_stay(const std::vector<double>& stay, const Vector& phi) {
    const int j = static_cast<int>(stay.size());
    if (j < 1) throw InvalidInput("markov_from_stay: empty stay vector");
    Matrix q(j, j);
    for (int k = 0; k < j; ++k) {
        if (stay[static_cast<std::size_t>(k)] <= 0.0 || stay[static_cast<std::size_t>(k)] > 1.0)
            throw InvalidInput("markov_from_stay: stay probabilities must be in (0, 1]");
        double off = j > 1 ? (1.0 - stay[static_cast<std::size_t>(k)]) / (j - 1) : 0.0;
        for (int l = 0; l < j; ++l) q(l, k) = l == k ? stay[static_cast<std::size_t>(k)] : off;
    }
    Vector p = phi.size() == 0 ? Vector::Constant(j, 1.0 / j) : phi;
    MarkovState m{q, p};
    validate_markov(m, j);
    return m;
}

FilterOutput hamilton_filter_ld(const Matrix& log_dens, const MarkovState& markov,
                                bool want_pairwise) {
    const auto t_count = log_dens.rows();
    const int j_count = static_cast<int>(log_dens.cols());
    validate_markov(markov, j_count);
    if (t_count < 1) throw InvalidInput("filter: empty sample");

    FilterOutput out;
    out.filtered.resize(t_count, j_count);
    out.predicted.resize(t_count, j_count);
    out.cond_loglik.resize(t_count);
    out.predicted.row(0) = markov.phi.transpose();
    if (want_pairwise) out.pairwise.reserve(static_cast<std::size_t>(t_count - 1));

    Vector log_joint(j_count);
    for (Eigen::Index t = 0; t < t_count; ++t) {
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < j_count; ++j) {
            double lp = out.predicted(t, j) > 0.0
                            ? std::log(out.predicted(t, j)) + log_dens(t, j)
                            : -std::numeric_limits<double>::infinity();
            log_joint(j) = lp;
            m = std::max(m, lp);
        }
        if (!std::isfinite(m))
            throw NumericalError("numerical-underflow: filter normalizer vanished at period " +
                                 std::to_string(t + 1));
        double s = 0.0;
        for (int j = 0; j < j_count; ++j) s += std::exp(log_joint(j) - m);
        out.cond_loglik(t) = m + std::log(s);
        for (int j = 0; j < j_count; ++j)
            out.filtered(t, j) = std::exp(log_joint(j) - m) / s;
        if (want_pairwise && t > 0) {
            Matrix pf(j_count, j_count);
            for (int j = 0; j < j_count; ++j)
                for (int k = 0; k < j_count; ++k) {
                    double prev = out.filtered(t - 1, k);
                    pf(j, k) = prev > 0.0 && markov.Q(j, k) > 0.0
                                   ? std::exp(log_dens(t, j) + std::log(markov.Q(j, k)) +
                                              std::log(prev) - out.cond_loglik(t))
                                   : 0.0;
                }
            out.pairwise.push_back(std::move(pf));
        }
        if (t + 1 < t_count)
            out.predicted.row(t + 1) = (markov.Q * out.filtered.row(t).transpose()).transpose();
    }
    return out;
}

FilterOutput hamilton_filter(const Panel& panel, const RegimeParams& params,
                             const MarkovState& markov, bool want_pairwise) {
    return hamilton_filter_ld(log_density_matrix(panel.x, params), markov, want_pairwise);
}

double full_markov_loglik(const Panel& panel, const RegimeParams& params,
                          const MarkovState& markov) {
    return hamilton_filter(panel, params, markov).cond_loglik.sum();
}

ProbSeries smoother(const FilterOutput& fo, const MarkovState& markov) {
    const auto t_count = fo.filtered.rows();
    const int j_count = static_cast<int>(fo.filtered.cols());
    validate_markov(markov, j_count);
    if (fo.predicted.rows() != t_count)
        throw InvalidInput("smoother: filtered/predicted shape mismatch");

    ProbSeries out;
    out.marginal.resize(t_count, j_count);
    out.marginal.row(t_count - 1) = fo.filtered.row(t_count - 1);
    out.pairwise.resize(static_cast<std::size_t>(std::max<Eigen::Index>(t_count - 1, 0)));

    Vector ratio(j_count);
    for (Eigen::Index t = t_count - 2; t >= 0; --t) {
        for (int j = 0; j < j_count; ++j) {
            if (fo.predicted(t + 1, j) < kDivGuard)
                throw NumericalError("numerical-underflow: predicted probability below 1e-300 at period " +
                                     std::to_string(t + 2));
            ratio(j) = out.marginal(t + 1, j) / fo.predicted(t + 1, j);
        }
        Vector row = fo.filtered.row(t).cwiseProduct((markov.Q.transpose() * ratio).transpose());
        out.marginal.row(t) = row / row.sum();

        Matrix pw(j_count, j_count);
        for (int j = 0; j < j_count; ++j)
            for (int k = 0; k < j_count; ++k)
                pw(j, k) = markov.Q(j, k) * fo.filtered(t, k) * ratio(j);
        out.pairwise[static_cast<std::size_t>(t)] = std::move(pw);
    }
    return out;
}

MarkovState estimate_transition(const ProbSeries& probs) {
    if (probs.pairwise.empty())
        throw InvalidInput("estimate_transition: pairwise probabilities required");
    const int j_count = static_cast<int>(probs.marginal.cols());
    Matrix total = Matrix::Zero(j_count, j_count);
    for (const auto& pw : probs.pairwise) total += pw;
    Matrix q(j_count, j_count);
    for (int k = 0; k < j_count; ++k) {
        double mass = total.col(k).sum();
        if (mass < kEmptyRegime)
            throw NumericalError("degenerate-regime: no transition mass out of regime " +
                                 std::to_string(k + 1));
        q.col(k) = total.col(k) / mass;
    }
    return {q, probs.marginal.row(0)};
}

Matrix estimate_factors_dynamic(const Panel& panel, const RegimeParams& params,
                                const ProbSeries& probs) {
    return estimate_factors_static(panel, params, probs);
}

namespace {

DynamicTrial run_dynamic_trial(const Panel& panel, const MarkovState& markov0,
                               const FitConfig& config, int trial) {
    DynamicTrial out;
    Philox rng(config.seed, 0x100 + static_cast<std::uint64_t>(trial));
    const auto n = panel.series();

    RegimeParams params;
    params.sigma2 = config.sigma2.fixed ? config.sigma2.value : 1.0;
    params.lambda.resize(config.dims.size());
    if (trial == 0 && config.init_params) {
        params = *config.init_params;
    } else {
        for (std::size_t j = 0; j < config.dims.size(); ++j) {
            Matrix l(n, config.dims[j]);
            for (Eigen::Index c = 0; c < l.cols(); ++c)
                for (Eigen::Index i = 0; i < l.rows(); ++i) l(i, c) = rng.next_normal();
            params.lambda[j] = std::move(l);
        }
    }
    if (trial == 0 && config.init_probs)
        params = m_step(panel.x, *config.init_probs, config.dims, config.sigma2, params.sigma2);

    MarkovState markov = markov0;
    double prev = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < config.max_iter; ++h) {
        Matrix lm = log_density_matrix(panel.x, params);
        FilterOutput fo = hamilton_filter_ld(lm, markov, false);
        double ll = fo.cond_loglik.sum();
        out.trace.push_back(ll);
        out.probs = smoother(fo, markov);
        if (h > 0 && std::abs(ll - prev) <= config.tol * (1.0 + std::abs(prev))) {
            out.converged = true;
            break;
        }
        prev = ll;
        if (h + 1 == config.max_iter) break;
        params = m_step(panel.x, out.probs.marginal, config.dims, config.sigma2, params.sigma2);
        if (config.iterate_transition) markov = estimate_transition(out.probs);
    }
    out.params = std::move(params);
    out.markov = std::move(markov);
    return out;
}

} // namespace

FitResult fit_dynamic(const Panel& panel, const MarkovState& markov, const FitConfig& config) {
    if (panel.periods() < 2) throw InvalidInput("fit: need at least two periods");
    if (!panel.x.allFinite()) throw InvalidInput("fit: panel contains non-finite entries");
    if (config.dims.empty()) throw InvalidInput("fit: no regime dimensions given");
    for (int r : config.dims) {
        if (r < 1) throw InvalidInput("fit: every regime needs rank >= 1");
        if (r > panel.series()) throw InvalidInput("fit: rank exceeds panel width");
    }
    const int j_count = static_cast<int>(config.dims.size());
    MarkovState m0 = markov.Q.size() == 0 ? uniform_markov(j_count) : markov;
    validate_markov(m0, j_count);
    if (config.n_trials < 1) throw InvalidInput("fit_dynamic: need at least one trial");

    std::vector<DynamicTrial> outcomes(static_cast<std::size_t>(config.n_trials));
    parallel_for(config.n_trials, config.jobs, [&](int i) {
        try {
            outcomes[static_cast<std::size_t>(i)] = run_dynamic_trial(panel, m0, config, i);
        } catch (const NumericalError& e) {
            outcomes[static_cast<std::size_t>(i)].degenerate = true;
            outcomes[static_cast<std::size_t>(i)].note = e.what();
        }
    });

    int best = -1;
    for (int i = 0; i < config.n_trials; ++i) {
        const auto& o = outcomes[static_cast<std::size_t>(i)];
        if (o.degenerate || o.trace.empty()) continue;
        if (best < 0 || o.trace.back() > outcomes[static_cast<std::size_t>(best)].trace.back())
            best = i;
    }
    if (best < 0) {
        std::ostringstream msg;
        msg << "fit-failure: all " << config.n_trials << " trials degenerate";
        for (int i = 0; i < config.n_trials; ++i) {
            const auto& o = outcomes[static_cast<std::size_t>(i)];
            msg << "\n  trial " << i << ": " << (o.note.empty() ? "no iterations" : o.note);
        }
        throw ConvergenceError(msg.str());
    }

    DynamicTrial& win = outcomes[static_cast<std::size_t>(best)];
    FitResult fit;
    fit.params = std::move(win.params);
    fit.state = std::move(win.markov);
    fit.probs = std::move(win.probs);
    fit.factors = estimate_factors_dynamic(panel, fit.params, fit.probs);
    fit.loglik_trace = std::move(win.trace);
    fit.iterations = static_cast<int>(fit.loglik_trace.size());
    fit.converged = win.converged;
    fit.trial_index = best;
    return fit;
}

} // namespace rfm
