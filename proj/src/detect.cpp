#include "rfm/detect.hpp"

#include "rfm/em_static.hpp"
#include "rfm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rfm {
namespace {

// Without labels the rare regime is taken to be regime 2: columns are
// ranked by occupancy, most occupied first.
std::vector<int> occupancy_order(const Matrix& marginal) {
    const int j = static_cast<int>(marginal.cols());
    std::vector<int> perm(static_cast<std::size_t>(j));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
        return marginal.col(a).mean() > marginal.col(b).mean();
    });
    return perm;
}

void validate_detector(const DetectorConfig& c) {
    if (c.d < 0) throw InvalidInput("detect: moving-average order must be >= 0");
    if (!(c.exit < c.enter) || c.enter <= 0.0 || c.enter >= 1.0 || c.exit <= 0.0 || c.exit >= 1.0)
        throw InvalidInput("detect: need 0 < exit < enter < 1");
    if (c.initial_phase != 0 && c.initial_phase != 1)
        throw InvalidInput("detect: initial phase must be 0 or 1");
}

} // namespace

Vector moving_average(const Vector& probs, int d) {
    if (d < 0) throw InvalidInput("moving_average: order must be >= 0");
    const int t = static_cast<int>(probs.size());
    Vector out(t);
    for (int i = 0; i < t; ++i) {
        // Mean of the finite values among the last d+1; NaN entries shrink
        // the window the same way the left boundary does.
        double sum = 0.0;
        int count = 0;
        for (int k = std::max(0, i - d); k <= i; ++k) {
            if (std::isnan(probs(k))) continue;
            sum += probs(k);
            ++count;
        }
        out(i) = count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

std::vector<TurningPoint> detect_turning_points(const Vector& probs, const DetectorConfig& config) {
    validate_detector(config);
    std::vector<TurningPoint> points;
    int phase = config.initial_phase;
    int last_date = -1;
    for (int i = 0; i < probs.size(); ++i) {
        double p = probs(i);
        if (std::isnan(p)) continue;
        bool cross = phase == 0 ? p > config.enter : p < config.exit;
        if (!cross) continue;
        TurningPoint tp;
        tp.t = std::max({i - config.d, 0, last_date + 1});
        tp.direction = phase == 0 ? +1 : -1;
        tp.detection_lag = i - tp.t;
        points.push_back(tp);
        last_date = tp.t;
        phase = 1 - phase;
    }
    return points;
}

std::vector<TurningPoint> detect_with_ma(const Vector& probs, const DetectorConfig& config) {
    return detect_turning_points(moving_average(probs, config.d), config);
}

RealtimeResult realtime_detect(const Panel& panel, const RealtimeConfig& config) {
    validate_detector(config.detector);
    const int t = panel.periods();
    const FitConfig& base = config.fit;
    if (base.dims.empty()) throw InvalidInput("realtime: fit.dims must name the regime ranks");
    const int j = static_cast<int>(base.dims.size());
    int maxr = *std::max_element(base.dims.begin(), base.dims.end());
    if (config.warmup < 10 * j * maxr)
        throw InvalidInput("realtime: warmup shorter than 10*J*max(r); not enough history to fit");
    if (config.warmup >= t) throw InvalidInput("realtime: warmup exceeds the panel");
    if (config.stride < 1) throw InvalidInput("realtime: stride must be >= 1");
    if (config.known_labels && static_cast<int>(config.known_labels->size()) < t)
        throw InvalidInput("realtime: label sequence shorter than the panel");

    MarkovState markov0 =
        config.stay.empty() ? uniform_markov(j) : markov_from_stay(config.stay);

    RealtimeResult res;
    res.probs = Vector::Constant(t, std::numeric_limits<double>::quiet_NaN());

    std::optional<RegimeParams> params;
    MarkovState markov_est;
    for (int s = config.warmup; s < t; ++s) {
        if (config.known_labels) {
            // A regime absent from the history cannot be estimated; its
            // filtered probability given that history is zero.
            int seen = 0;
            for (int i = 0; i < s; ++i)
                if ((*config.known_labels)[static_cast<std::size_t>(i)] == 1) ++seen;
            if (seen == 0) {
                res.probs(s) = 0.0;
                continue;
            }
        }
        bool refit = !params || (s - config.warmup) % config.stride == 0;
        if (refit) {
            Panel window;
            window.x = panel.x.topRows(s);
            FitConfig fc = base;
            fc.jobs = 1;
            if (params) fc.init_params = *params;
            if (config.known_labels) {
                Matrix seed = Matrix::Zero(s, j);
                for (int i = 0; i < s; ++i) {
                    int z = (*config.known_labels)[static_cast<std::size_t>(i)];
                    if (z < 0 || z >= j) throw InvalidInput("realtime: label out of range");
                    seed(i, z) = 1.0;
                }
                fc.init_probs = seed;
            }
            try {
                FitResult fit = fit_dynamic(window, markov0, fc);
                std::vector<int> perm;
                if (config.known_labels) {
                    std::vector<int> hist(config.known_labels->begin(),
                                          config.known_labels->begin() + s);
                    perm = match_labels(fit.probs.marginal, hist);
                } else {
                    perm = occupancy_order(fit.probs.marginal);
                }
                apply_permutation(fit, perm);
                markov_est = estimate_transition(fit.probs);
                params = fit.params;
            } catch (const NumericalError&) {
                res.failed_windows.push_back(s);
                continue;
            } catch (const ConvergenceError&) {
                res.failed_windows.push_back(s);
                continue;
            }
        }
        Panel upto;
        upto.x = panel.x.topRows(s + 1);
        FilterOutput fo = hamilton_filter(upto, *params, markov_est);
        res.probs(s) = fo.filtered(s, 1);
    }

    // The average is backward-looking, so applying it to the one-sided
    // probabilities stays causal; NaN gaps propagate for d periods and the
    // hysteresis rule skips them.
    res.points = detect_with_ma(res.probs, config.detector);
    return res;
}

} // namespace rfm
