#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rfm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/* Error taxonomy. The CLI maps these onto exit codes: InvalidInput -> 2,
   NumericalError -> 3, ConvergenceError -> 4. */

/// Malformed or inconsistent caller input (bad dimensions, unknown codes,
/// insufficient sample, unparsable files).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure: degenerate weights, probability underflow, loss of
/// positive definiteness. The computation cannot continue honestly.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Estimation did not reach a usable optimum (iteration cap hit with the
/// trace still moving, or every restart degenerate).
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Observed data block. Rows are time periods, columns are series.
struct Panel {
    Matrix x;                             // T x N
    std::vector<std::string> names;       // size N, may be empty
    std::vector<std::string> dates;       // size T, may be empty

    Eigen::Index periods() const { return x.rows(); }
    Eigen::Index series() const { return x.cols(); }
};

/// Per-regime loadings plus the shared idiosyncratic variance.
/// lambda[j] is N x r_j; regimes may have different ranks.
struct RegimeParams {
    std::vector<Matrix> lambda;
    double sigma2 = 1.0;

    int regimes() const { return static_cast<int>(lambda.size()); }
    Eigen::Index series() const { return lambda.empty() ? 0 : lambda[0].rows(); }
    Eigen::Index rank(int j) const { return lambda[static_cast<std::size_t>(j)].cols(); }
    Eigen::Index max_rank() const {
        Eigen::Index m = 0;
        for (const auto& l : lambda) m = std::max(m, l.cols());
        return m;
    }
};

/// Time-invariant mixing weights q_j (static model).
struct StaticState {
    Vector q;
};

/// First-order Markov chain. Q(j,k) = Pr(z_t = j | z_{t-1} = k), so each
/// column of Q sums to one. phi is the distribution of the first state.
struct MarkovState {
    Matrix Q;
    Vector phi;
};

using StateModel = std::variant<StaticState, MarkovState>;

/// Regime probabilities attached to a sample.
/// marginal(t, j) = Pr(z_{t+1} = j | information set), rows sum to one.
/// pairwise, when present, has T-1 entries with
/// pairwise[t](j, k) = Pr(z_{t+2} = j, z_{t+1} = k | information set)
/// (0-based t; entry t covers the transition into period t+1).
struct ProbSeries {
    Matrix marginal;
    std::vector<Matrix> pairwise;
};

/// Everything a fit produces. factors has max_j r_j columns; row t carries
/// the posterior-weighted factor estimate, zero-padded beyond the rank of
/// each contributing regime.
struct FitResult {
    RegimeParams params;
    StateModel state;
    ProbSeries probs;
    Matrix factors;
    std::vector<double> loglik_trace;
    int iterations = 0;
    bool converged = false;
    int trial_index = -1;
};

} // namespace rfm
