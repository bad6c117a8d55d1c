#include "rfm/simulate.hpp"

#include "rfm/data_io.hpp"

#include <cmath>
#include <utility>

namespace rfm {
namespace {

/* NBER quarterly business-cycle chronology, 1945Q2 through 2020Q1 (300
 * quarters). A quarter counts as recession from the quarter after the peak
 * through the trough quarter, which yields 45 recession quarters. Spans are
 * 0-based [first, last] indices on the 1945Q2 axis. The same sequence ships
 * as data/nber_recessions_1945q2_2020q1.csv.
 */
constexpr std::pair<int, int> kNberSpans[] = {
    {0, 2},     // 1945Q2-1945Q4
    {15, 18},   // 1949Q1-1949Q4
    {33, 36},   // 1953Q3-1954Q2
    {50, 52},   // 1957Q4-1958Q2
    {61, 63},   // 1960Q3-1961Q1
    {99, 102},  // 1970Q1-1970Q4
    {115, 119}, // 1974Q1-1975Q1
    {140, 141}, // 1980Q2-1980Q3
    {146, 150}, // 1981Q4-1982Q4
    {182, 183}, // 1990Q4-1991Q1
    {224, 226}, // 2001Q2-2001Q4
    {251, 256}, // 2008Q1-2009Q2
    {299, 299}, // 2020Q1
};
constexpr int kNberLen = 300;

Matrix pattern4_q0() {
    Matrix q(2, 2);
    q << 0.95, 0.28, 0.05, 0.72;
    return q;
}

} // namespace

const std::vector<int>& nber_quarterly_labels() {
    static const std::vector<int> labels = [] {
        std::vector<int> v(kNberLen, 0);
        for (auto [a, b] : kNberSpans)
            for (int i = a; i <= b; ++i) v[static_cast<std::size_t>(i)] = 1;
        return v;
    }();
    return labels;
}

std::vector<std::string> nber_quarter_names() {
    std::vector<std::string> names;
    names.reserve(kNberLen);
    int year = 1945, q = 2;
    for (int i = 0; i < kNberLen; ++i) {
        names.push_back(std::to_string(year) + "Q" + std::to_string(q));
        if (++q == 5) {
            q = 1;
            ++year;
        }
    }
    return names;
}

Matrix gen_factors(int t, int r, double rho, Philox& rng) {
    if (std::abs(rho) >= 1.0) throw InvalidInput("gen_factors: |rho| must be < 1");
    if (t < 1 || r < 1) throw InvalidInput("gen_factors: bad dimensions");
    Matrix f(t, r);
    double scale0 = 1.0 / std::sqrt(1.0 - rho * rho);
    for (int p = 0; p < r; ++p) {
        f(0, p) = scale0 * rng.next_normal();
        for (int i = 1; i < t; ++i) f(i, p) = rho * f(i - 1, p) + rng.next_normal();
    }
    return f;
}

Matrix gen_errors(int t, int n, double alpha, double beta, Philox& rng) {
    if (std::abs(alpha) >= 1.0 || beta < 0.0 || beta >= 1.0)
        throw InvalidInput("gen_errors: need |alpha| < 1 and beta in [0, 1)");
    if (t < 1 || n < 1) throw InvalidInput("gen_errors: bad dimensions");
    // v_t ~ N(0, Omega) with Omega_ij = beta^|i-j| via the cross-sectional
    // AR(1) factorization: v_1 = w_1, v_i = beta v_{i-1} + sqrt(1-b^2) w_i.
    Matrix e(t, n);
    double cross = std::sqrt(1.0 - beta * beta);
    double scale0 = 1.0 / std::sqrt(1.0 - alpha * alpha);
    Vector v(n);
    for (int i = 0; i < t; ++i) {
        v(0) = rng.next_normal();
        for (int k = 1; k < n; ++k) v(k) = beta * v(k - 1) + cross * rng.next_normal();
        if (i == 0)
            e.row(0) = scale0 * v.transpose();
        else
            e.row(i) = alpha * e.row(i - 1) + v.transpose();
    }
    return e;
}

std::vector<Matrix> gen_loadings(int n, int dgp, double rho, double alpha, double r2,
                                 Philox& rng) {
    if (dgp < 1 || dgp > 3) throw InvalidInput("gen_loadings: dgp must be 1, 2, or 3");
    if (r2 <= 0.0 || r2 >= 1.0) throw InvalidInput("gen_loadings: R^2 must be in (0, 1)");
    double base = (1.0 - rho * rho) / (1.0 - alpha * alpha);
    double var = dgp == 3 ? base * r2 / (1.0 - r2) : base * 2.0 * r2 / (1.0 - r2);
    double sd = std::sqrt(var);
    auto column = [&] {
        Vector c(n);
        for (int i = 0; i < n; ++i) c(i) = sd * rng.next_normal();
        return c;
    };
    std::vector<Matrix> out(2);
    if (dgp == 3) {
        out[0] = column();
        out[1] = column();
    } else if (dgp == 1) {
        out[0] = Matrix(n, 2);
        out[1] = Matrix(n, 2);
        out[0].col(0) = column();
        out[0].col(1) = column();
        out[1].col(0) = column();
        out[1].col(1) = column();
    } else {
        Vector shared = column();
        out[0] = Matrix(n, 2);
        out[1] = Matrix(n, 2);
        out[0].col(0) = shared;
        out[0].col(1) = column();
        out[1].col(0) = shared;
        out[1].col(1) = column();
    }
    return out;
}

std::pair<std::vector<int>, PatternMeta> gen_states(int t, int pattern, Philox& rng,
                                                    const std::optional<std::string>& label_file) {
    PatternMeta meta;
    std::vector<int> z;
    switch (pattern) {
    case 1: {
        if (label_file) {
            z = load_labels(*label_file);
            if (static_cast<int>(z.size()) != t)
                throw InvalidInput("gen_states: label file has " + std::to_string(z.size()) +
                                   " labels, panel needs " + std::to_string(t));
            meta.source = *label_file;
        } else {
            if (t != kNberLen)
                throw InvalidInput("gen_states: pattern 1 requires T=300 "
                                   "(NBER quarters 1945Q2-2020Q1) or a label file");
            z = nber_quarterly_labels();
            meta.source = "NBER quarterly chronology 1945Q2-2020Q1";
        }
        break;
    }
    case 2: {
        int br = t / 2;
        z.assign(static_cast<std::size_t>(t), 0);
        for (int i = br; i < t; ++i) z[static_cast<std::size_t>(i)] = 1;
        meta.breaks = {br};
        break;
    }
    case 3: {
        int b1 = t / 3, b2 = 2 * t / 3;
        z.assign(static_cast<std::size_t>(t), 0);
        for (int i = b1; i < b2; ++i) z[static_cast<std::size_t>(i)] = 1;
        meta.breaks = {b1, b2};
        break;
    }
    case 4: {
        meta.q0 = pattern4_q0();
        double pi2 = (1.0 - meta.q0(0, 0)) / (2.0 - meta.q0(0, 0) - meta.q0(1, 1));
        z.resize(static_cast<std::size_t>(t));
        z[0] = rng.next_double() < pi2 ? 1 : 0;
        for (int i = 1; i < t; ++i) {
            int prev = z[static_cast<std::size_t>(i - 1)];
            z[static_cast<std::size_t>(i)] = rng.next_double() < meta.q0(0, prev) ? 0 : 1;
        }
        break;
    }
    default:
        throw InvalidInput("gen_states: pattern must be 1..4");
    }
    return {std::move(z), std::move(meta)};
}

SimTruth simulate_panel(const SimConfig& config) {
    if (config.n < 1 || config.t < 2) throw InvalidInput("simulate: need N >= 1, T >= 2");
    const int r = config.dgp == 3 ? 1 : 2;

    Philox rng_f(config.seed, 1);
    Philox rng_e(config.seed, 2);
    Philox rng_l(config.seed, 3);
    Philox rng_z(config.seed, 4);

    SimTruth truth;
    truth.config = config;
    truth.factors = gen_factors(config.t, r, config.rho, rng_f);
    truth.loadings = gen_loadings(config.n, config.dgp, config.rho, config.alpha, config.r2, rng_l);
    auto [states, meta] = gen_states(config.t, config.pattern, rng_z, config.label_file);
    truth.states = std::move(states);
    truth.meta = std::move(meta);
    Matrix e = gen_errors(config.t, config.n, config.alpha, config.beta, rng_e);

    truth.panel.x.resize(config.t, config.n);
    for (int i = 0; i < config.t; ++i) {
        const Matrix& l = truth.loadings[static_cast<std::size_t>(truth.states[static_cast<std::size_t>(i)])];
        truth.panel.x.row(i) = (l * truth.factors.row(i).transpose()).transpose() + e.row(i);
    }
    truth.panel.names.reserve(static_cast<std::size_t>(config.n));
    for (int i = 1; i <= config.n; ++i) truth.panel.names.push_back("s" + std::to_string(i));
    return truth;
}

} // namespace rfm
