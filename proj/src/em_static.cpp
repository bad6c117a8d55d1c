#include "rfm/em_static.hpp"

#include "rfm/density.hpp"
#include "rfm/parallel.hpp"
#include "rfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rfm {
namespace {

constexpr double kEpsFloor = 1e-8;
constexpr double kEmptyRegime = 1e-12;

Vector uniform_q(int j) { return Vector::Constant(j, 1.0 / j); }

void validate_dims(const Panel& panel, const std::vector<int>& dims) {
    if (panel.periods() < 2) throw InvalidInput("fit: need at least two periods");
    if (!panel.x.allFinite()) throw InvalidInput("fit: panel contains non-finite entries");
    if (dims.empty()) throw InvalidInput("fit: no regime dimensions given");
    for (int r : dims) {
        if (r < 1) throw InvalidInput("fit: every regime needs rank >= 1");
        if (r > panel.series()) throw InvalidInput("fit: rank exceeds panel width");
    }
}

/// Eigen-decompositions of the per-regime weighted covariances; the inner
/// sigma2 iteration reuses them since S_j does not move within an M-step.
struct MStepCache {
    std::vector<Vector> eigvals;   // descending, top r_j
    std::vector<Matrix> eigvecs;   // N x r_j, matching order
    Vector qbar;                   // column means of weights
    double tr_x = 0.0;             // tr((1/T) sum_t x_t x_t')
};

Matrix loadings_from_eigs(const Vector& vals, const Matrix& vecs, double sigma2) {
    Matrix lambda = vecs;
    for (Eigen::Index l = 0; l < vals.size(); ++l) {
        double norm2 = std::max(vals(l) - sigma2, kEpsFloor);
        Eigen::Index imax;
        vecs.col(l).cwiseAbs().maxCoeff(&imax);
        double sign = vecs(imax, l) < 0.0 ? -1.0 : 1.0;
        lambda.col(l) = vecs.col(l) * (sign * std::sqrt(norm2));
    }
    return lambda;
}

MStepCache build_cache(const Matrix& x, const Matrix& weights, const std::vector<int>& dims) {
    const auto t = x.rows();
    const int j_count = static_cast<int>(weights.cols());
    MStepCache cache;
    cache.qbar = weights.colwise().mean();
    cache.tr_x = x.squaredNorm() / static_cast<double>(t);
    cache.eigvals.reserve(dims.size());
    cache.eigvecs.reserve(dims.size());
    for (int j = 0; j < j_count; ++j) {
        Vector w = weights.col(j);
        if (w.sum() < kEmptyRegime)
            throw NumericalError("degenerate-weights: regime " + std::to_string(j + 1) +
                                 " has no posterior mass");
        Matrix s = weighted_covariance(x, w);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
        if (eig.info() != Eigen::Success)
            throw NumericalError("m_step: eigendecomposition failed");
        const int r = dims[static_cast<std::size_t>(j)];
        Vector vals(r);
        Matrix vecs(x.cols(), r);
        const auto n = eig.eigenvalues().size();
        for (int l = 0; l < r; ++l) {
            vals(l) = eig.eigenvalues()(n - 1 - l);
            vecs.col(l) = eig.eigenvectors().col(n - 1 - l);
        }
        cache.eigvals.push_back(std::move(vals));
        cache.eigvecs.push_back(std::move(vecs));
    }
    return cache;
}

double clamp_sigma2(double v, double c) { return std::clamp(v, 1.0 / (c * c), c * c); }

struct TrialOutcome {
    RegimeParams params;
    Matrix probs;
    Vector q;
    std::vector<double> trace;
    bool converged = false;
    bool degenerate = false;
    std::string note;
};

} // namespace

ProbSeries e_step_static(const Panel& panel, const RegimeParams& params, const Vector& q) {
    if (q.size() != params.regimes())
        throw InvalidInput("e_step: q length differs from regime count");
    Matrix lm = log_density_matrix(panel.x, params);
    ProbSeries out;
    detail::logsumexp_rows(lm, q, &out.marginal);
    return out;
}

Matrix weighted_covariance(const Matrix& x, const Vector& weights) {
    if (weights.size() != x.rows())
        throw InvalidInput("weighted_covariance: weight length differs from T");
    if ((weights.array() < 0.0).any())
        throw InvalidInput("weighted_covariance: negative weight");
    double total = weights.sum();
    if (total < kEmptyRegime)
        throw NumericalError("degenerate-weights: total weight is zero");
    Matrix xw = weights.cwiseSqrt().asDiagonal() * x;
    Matrix s = (xw.transpose() * xw) / total;
    return (s + s.transpose()) / 2.0;
}

Matrix m_step_loadings(const Matrix& s, int r, double sigma2) {
    if (s.rows() != s.cols()) throw InvalidInput("m_step_loadings: S not square");
    if (r < 1 || r > s.rows()) throw InvalidInput("m_step_loadings: bad rank");
    if (sigma2 <= 0.0) throw InvalidInput("m_step_loadings: sigma2 must be positive");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    if (eig.info() != Eigen::Success)
        throw NumericalError("m_step_loadings: eigendecomposition failed");
    Vector vals(r);
    Matrix vecs(s.rows(), r);
    const auto n = eig.eigenvalues().size();
    for (int l = 0; l < r; ++l) {
        vals(l) = eig.eigenvalues()(n - 1 - l);
        vecs.col(l) = eig.eigenvectors().col(n - 1 - l);
    }
    return loadings_from_eigs(vals, vecs, sigma2);
}

double sigma2_update(const Matrix& x, const std::vector<Matrix>& loadings,
                     const Matrix& weights, double clamp_c) {
    if (weights.rows() != x.rows())
        throw InvalidInput("sigma2_update: weights rows differ from T");
    if (static_cast<int>(loadings.size()) != weights.cols())
        throw InvalidInput("sigma2_update: loadings count differs from weight columns");
    double tr_x = x.squaredNorm() / static_cast<double>(x.rows());
    double tr_l = 0.0;
    for (Eigen::Index j = 0; j < weights.cols(); ++j)
        tr_l += weights.col(j).mean() * loadings[static_cast<std::size_t>(j)].squaredNorm();
    return clamp_sigma2((tr_x - tr_l) / static_cast<double>(x.cols()), clamp_c);
}

RegimeParams m_step(const Matrix& x, const Matrix& weights, const std::vector<int>& dims,
                    const Sigma2Mode& mode, double sigma2_start, MStepInfo* info) {
    if (static_cast<int>(dims.size()) != weights.cols())
        throw InvalidInput("m_step: dims count differs from weight columns");
    MStepCache cache = build_cache(x, weights, dims);
    const int j_count = static_cast<int>(dims.size());
    const double n = static_cast<double>(x.cols());

    RegimeParams params;
    params.lambda.resize(static_cast<std::size_t>(j_count));
    int inner = 0;
    double delta = 0.0;

    if (mode.fixed) {
        params.sigma2 = mode.value;
        inner = 1;
    } else {
        double sigma2 = clamp_sigma2(sigma2_start, mode.clamp_c);
        for (inner = 1; inner <= 100; ++inner) {
            double tr_l = 0.0;
            for (int j = 0; j < j_count; ++j) {
                double t = 0.0;
                for (double mu : cache.eigvals[static_cast<std::size_t>(j)])
                    t += std::max(mu - sigma2, kEpsFloor);
                tr_l += cache.qbar(j) * t;
            }
            double next = clamp_sigma2((cache.tr_x - tr_l) / n, mode.clamp_c);
            delta = std::abs(next - sigma2);
            sigma2 = next;
            if (delta < 1e-8) break;
        }
        inner = std::min(inner, 100);
        params.sigma2 = sigma2;
    }
    for (int j = 0; j < j_count; ++j)
        params.lambda[static_cast<std::size_t>(j)] = loadings_from_eigs(
            cache.eigvals[static_cast<std::size_t>(j)],
            cache.eigvecs[static_cast<std::size_t>(j)], params.sigma2);
    if (info) {
        info->inner_iterations = inner;
        info->sigma2_delta = delta;
    }
    return params;
}

Vector estimate_q(const ProbSeries& probs) {
    if (probs.marginal.rows() == 0) throw InvalidInput("estimate_q: empty probabilities");
    Vector q = probs.marginal.colwise().mean();
    return q / q.sum();
}

Matrix estimate_factors_static(const Panel& panel, const RegimeParams& params,
                               const ProbSeries& probs) {
    const auto t = panel.periods();
    if (probs.marginal.rows() != t)
        throw InvalidInput("estimate_factors: probability rows differ from T");
    if (probs.marginal.cols() != params.regimes())
        throw InvalidInput("estimate_factors: probability columns differ from regimes");
    Matrix f = Matrix::Zero(t, params.max_rank());
    for (int j = 0; j < params.regimes(); ++j) {
        const Matrix& lambda = params.lambda[static_cast<std::size_t>(j)];
        Matrix a = lambda.transpose() * lambda;
        a.diagonal().array() += params.sigma2;
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() != Eigen::Success)
            throw NumericalError("estimate_factors: SPD factorization failed");
        Matrix g = llt.solve(lambda.transpose() * panel.x.transpose()).transpose(); // T x r_j
        f.leftCols(lambda.cols()) += probs.marginal.col(j).asDiagonal() * g;
    }
    return f;
}

namespace {

TrialOutcome run_static_trial(const Panel& panel, const Vector& q0, const FitConfig& config,
                              int trial) {
    TrialOutcome out;
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

    Vector q = q0;
    double prev = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < config.max_iter; ++h) {
        Matrix marginal;
        Matrix lm = log_density_matrix(panel.x, params);
        double ll = detail::logsumexp_rows(lm, q, &marginal);
        out.trace.push_back(ll);
        out.probs = std::move(marginal);
        if (h > 0 && std::abs(ll - prev) <= config.tol * (1.0 + std::abs(prev))) {
            out.converged = true;
            break;
        }
        prev = ll;
        if (h + 1 == config.max_iter) break;
        params = m_step(panel.x, out.probs, config.dims, config.sigma2, params.sigma2);
        if (config.iterate_q) {
            Vector qn = out.probs.colwise().mean();
            q = qn / qn.sum();
        }
    }
    out.params = std::move(params);
    out.q = q;
    return out;
}

} // namespace

FitResult fit_static(const Panel& panel, const Vector& q, const FitConfig& config) {
    validate_dims(panel, config.dims);
    const int j_count = static_cast<int>(config.dims.size());
    Vector q0 = q.size() == 0 ? uniform_q(j_count) : q;
    if (q0.size() != j_count) throw InvalidInput("fit_static: q length differs from regimes");
    if ((q0.array() <= 0.0).any()) throw InvalidInput("fit_static: q entries must be positive");
    q0 /= q0.sum();
    if (config.n_trials < 1) throw InvalidInput("fit_static: need at least one trial");

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(config.n_trials));
    parallel_for(config.n_trials, config.jobs, [&](int i) {
        try {
            outcomes[static_cast<std::size_t>(i)] = run_static_trial(panel, q0, config, i);
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

    TrialOutcome& win = outcomes[static_cast<std::size_t>(best)];
    FitResult fit;
    fit.params = std::move(win.params);
    fit.state = StaticState{win.q};
    fit.probs = ProbSeries{std::move(win.probs), {}};
    fit.factors = estimate_factors_static(panel, fit.params, fit.probs);
    fit.loglik_trace = std::move(win.trace);
    fit.iterations = static_cast<int>(fit.loglik_trace.size());
    fit.converged = win.converged;
    fit.trial_index = best;
    return fit;
}

} // namespace rfm
