#pragma once

#include "rfm/em_dynamic.hpp"
#include "rfm/types.hpp"

#include <optional>

namespace rfm {

struct DetectorConfig {
    int d = 3;                  // moving-average order
    double enter = 0.9;         // simulation defaults; empirical rule uses 0.8/0.2
    double exit = 0.1;
    int initial_phase = 0;      // 0 = start in regime 1
};

struct TurningPoint {
    int t = 0;          // 0-based event date (the crossing period minus d)
    int direction = 0;  // +1 = into regime 2, -1 = back to regime 1
    int detection_lag = 0;  // periods between event date and the triggering period
};

/// Backward moving average over d+1 terms; the window shrinks near the left
/// boundary to the available terms, and NaN entries (realtime gaps) shrink
/// it the same way.
Vector moving_average(const Vector& probs, int d);

/// Hysteresis rule on an (already averaged) probability series: starting in
/// initial_phase, the first p_t > enter dates an entry at t - d, after which
/// only the exit condition is armed, and vice versa. Directions alternate by
/// construction. Event dates are clamped to keep the sequence strictly
/// increasing when crossings happen while the window is still filling.
std::vector<TurningPoint> detect_turning_points(const Vector& probs, const DetectorConfig& config);

/// moving_average then detect_turning_points with the same d.
std::vector<TurningPoint> detect_with_ma(const Vector& probs, const DetectorConfig& config);

struct RealtimeConfig {
    int warmup = 0;             // first evaluated period; must leave room to fit
    int stride = 1;             // refit cadence; between refits only the filter advances
    DetectorConfig detector{0, 0.8, 0.2, 0};
    FitConfig fit;              // trials/tol/seed for each window's EM
    std::vector<double> stay;   // EM-filter Q diagonal; empty = uniform
    std::optional<std::vector<int>> known_labels;  // truth through each s-1, seeds EM
};

struct RealtimeResult {
    Vector probs;                    // regime-2 filtered probability per period
                                      // (NaN before warmup and on failed windows)
    std::vector<TurningPoint> points;
    std::vector<int> failed_windows;
};

/// Expanding-window pipeline: for each evaluated period s, fit the smoothed
/// EM on periods 0..s-1 (warm-started from the previous window, label-seeded
/// when labels are given), re-estimate (Q, phi) from the smoothed fit, run
/// the filter through period s and record the regime-2 filtered probability.
/// Detection applies the hysteresis rule with d=0 on those probabilities.
RealtimeResult realtime_detect(const Panel& panel, const RealtimeConfig& config);

} // namespace rfm
