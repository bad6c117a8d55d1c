#include "rfm/density.hpp"

#include <cmath>
#include <numbers>

namespace rfm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) throw InvalidInput(std::string(what) + " has non-finite entries");
}

/// Per-regime factorization shared by all periods.
struct RegimeKernel {
    Eigen::LLT<Matrix> llt;   // of A = sigma2 I + Lambda'Lambda
    double logdet_sigma;      // log|Lambda Lambda' + sigma2 I_N|

    RegimeKernel(const Matrix& lambda, double sigma2) {
        const auto n = lambda.rows();
        const auto r = lambda.cols();
        Matrix a = lambda.transpose() * lambda;
        a.diagonal().array() += sigma2;
        llt.compute(a);
        if (llt.info() != Eigen::Success)
            throw NumericalError("regime density: SPD factorization failed");
        double logdet_a = 0.0;
        for (Eigen::Index i = 0; i < r; ++i)
            logdet_a += 2.0 * std::log(llt.matrixL()(i, i));
        logdet_sigma = static_cast<double>(n - r) * std::log(sigma2) + logdet_a;
    }
};

} // namespace

double regime_log_density(const Vector& x, const Matrix& lambda, double sigma2) {
    if (sigma2 <= 0.0) throw InvalidInput("regime density: sigma2 must be positive");
    if (x.size() != lambda.rows())
        throw InvalidInput("regime density: x and loadings disagree on N");
    check_finite(x, "x");
    check_finite(lambda, "loadings");

    RegimeKernel k(lambda, sigma2);
    Vector g = lambda.transpose() * x;
    double quad = (x.squaredNorm() - g.dot(k.llt.solve(g))) / sigma2;
    return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + k.logdet_sigma + quad);
}

Matrix log_density_matrix(const Matrix& x, const RegimeParams& params) {
    if (params.sigma2 <= 0.0) throw InvalidInput("density matrix: sigma2 must be positive");
    if (params.lambda.empty()) throw InvalidInput("density matrix: no regimes");
    check_finite(x, "panel");
    const auto t = x.rows();
    const auto n = x.cols();
    const int j_count = params.regimes();

    Matrix out(t, j_count);
    Vector xnorm = x.rowwise().squaredNorm();
    for (int j = 0; j < j_count; ++j) {
        const Matrix& lambda = params.lambda[static_cast<std::size_t>(j)];
        if (lambda.rows() != n)
            throw InvalidInput("density matrix: loadings row count differs from panel width");
        check_finite(lambda, "loadings");
        RegimeKernel k(lambda, params.sigma2);
        Matrix g = x * lambda;                         // T x r
        Matrix solved = k.llt.solve(g.transpose());    // r x T
        double base = -0.5 * (static_cast<double>(n) * kLog2Pi + k.logdet_sigma);
        for (Eigen::Index i = 0; i < t; ++i) {
            double quad = (xnorm(i) - g.row(i).dot(solved.col(i))) / params.sigma2;
            out(i, j) = base - 0.5 * quad;
        }
    }
    return out;
}

double detail::logsumexp_rows(const Matrix& lm, const Vector& weights, Matrix* probs) {
    const auto t = lm.rows();
    const auto j = lm.cols();
    Vector logw(j);
    for (Eigen::Index k = 0; k < j; ++k) {
        if (weights(k) <= 0.0) throw InvalidInput("mixture weights must be positive");
        logw(k) = std::log(weights(k));
    }
    if (probs) probs->resize(t, j);
    double total = 0.0;
    for (Eigen::Index i = 0; i < t; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < j; ++k) m = std::max(m, lm(i, k) + logw(k));
        if (!std::isfinite(m))
            throw NumericalError("log-sum-exp underflow at period " + std::to_string(i));
        double s = 0.0;
        for (Eigen::Index k = 0; k < j; ++k) s += std::exp(lm(i, k) + logw(k) - m);
        total += m + std::log(s);
        if (probs)
            for (Eigen::Index k = 0; k < j; ++k)
                (*probs)(i, k) = std::exp(lm(i, k) + logw(k) - m) / s;
    }
    return total;
}

double mixture_loglik(const Panel& panel, const RegimeParams& params, const Vector& q) {
    if (q.size() != params.regimes())
        throw InvalidInput("mixture_loglik: q length differs from regime count");
    Matrix lm = log_density_matrix(panel.x, params);
    return detail::logsumexp_rows(lm, q, nullptr);
}

} // namespace rfm
