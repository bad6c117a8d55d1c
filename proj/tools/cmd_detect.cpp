#include "common.hpp"

#include "rfm/detect.hpp"

#include <cmath>
#include <fstream>

namespace cli {
namespace {

struct DetectOpts {
    std::string probs_path;
    std::string column;
    std::string out_dir;
    rfm::DetectorConfig det;
    std::string truth_states;
    // realtime
    bool realtime = false;
    std::string panel_path;
    int warmup = 0;
    int stride = 1;
    int regimes = 2;
    std::vector<int> factors = {1};
    int trials = -1;
    std::vector<double> stay;
    std::string labels_path;
};

/// True event dates from a label sequence: period where the regime changes.
std::vector<rfm::TurningPoint> events_from_labels(const std::vector<int>& z) {
    std::vector<rfm::TurningPoint> ev;
    for (std::size_t i = 1; i < z.size(); ++i)
        if (z[i] != z[i - 1])
            ev.push_back({static_cast<int>(i), z[i] == 1 ? +1 : -1, 0});
    return ev;
}

void write_points(const std::string& path, const std::vector<rfm::TurningPoint>& pts) {
    std::ofstream out(path);
    if (!out) throw rfm::InvalidInput("cannot write " + path);
    out << "period,direction,detection_lag\n";
    for (const auto& p : pts)
        out << p.t + 1 << ',' << (p.direction > 0 ? "enter" : "exit") << ',' << p.detection_lag
            << '\n';
}

void write_report(const std::string& path, const std::vector<rfm::TurningPoint>& pts,
                  const std::vector<rfm::TurningPoint>& truth_events,
                  const std::vector<int>& failed, const rfm::DetectorConfig& det, bool realtime) {
    std::ofstream out(path);
    if (!out) throw rfm::InvalidInput("cannot write " + path);
    out << "turning point report\n";
    out << "rule: enter above " << det.enter << ", exit below " << det.exit
        << ", moving average order " << det.d << (realtime ? ", one-sided (realtime)" : "")
        << "\n\n";
    out << "detected events (1-based periods):\n";
    if (pts.empty()) out << "  none\n";
    for (const auto& p : pts)
        out << "  period " << p.t + 1 << "  " << (p.direction > 0 ? "enter regime 2" : "exit regime 2")
            << "  detected " << p.detection_lag << " periods later\n";
    if (!truth_events.empty()) {
        out << "\nreference events and detection lags:\n";
        // A detected event matches the nearest same-direction reference; the
        // lag is publication periods between the reference date and the
        // period whose data triggered the call.
        for (const auto& ev : truth_events) {
            const rfm::TurningPoint* best = nullptr;
            for (const auto& p : pts) {
                if (p.direction != ev.direction) continue;
                if (!best || std::abs(p.t - ev.t) < std::abs(best->t - ev.t)) best = &p;
            }
            out << "  period " << ev.t + 1 << "  "
                << (ev.direction > 0 ? "enter regime 2" : "exit regime 2");
            if (best)
                out << "  matched detection dated " << best->t + 1 << " (triggered at "
                    << best->t + best->detection_lag + 1 << ", lag "
                    << best->t + best->detection_lag - ev.t << ")\n";
            else
                out << "  missed\n";
        }
    }
    if (!failed.empty()) {
        out << "\nwindows with failed refits (probabilities carried no value):\n  ";
        for (std::size_t i = 0; i < failed.size(); ++i)
            out << failed[i] + 1 << (i + 1 < failed.size() ? "," : "\n");
    }
}

void run(const DetectOpts& o, const GlobalOpts& g) {
    auto dir = ensure_dir(o.out_dir);
    std::vector<rfm::TurningPoint> truth_events;
    if (!o.truth_states.empty())
        truth_events = events_from_labels(rfm::load_labels(o.truth_states));

    if (!o.realtime) {
        rfm::Vector probs = load_prob_column(o.probs_path, o.column);
        auto pts = rfm::detect_with_ma(probs, o.det);
        write_points((dir / "turning_points.csv").string(), pts);
        write_report((dir / "report.txt").string(), pts, truth_events, {}, o.det, false);
        return;
    }

    rfm::Panel panel = rfm::load_panel(o.panel_path);
    rfm::RealtimeConfig rc;
    rc.warmup = o.warmup;
    rc.stride = o.stride;
    rc.detector = o.det;
    rc.fit.dims = o.factors;
    if (static_cast<int>(rc.fit.dims.size()) == 1 && o.regimes > 1)
        rc.fit.dims.assign(static_cast<std::size_t>(o.regimes), o.factors[0]);
    rc.fit.n_trials = o.trials > 0 ? o.trials : 15;
    rc.fit.seed = g.seed;
    rc.stay = o.stay;
    if (!o.labels_path.empty()) rc.known_labels = rfm::load_labels(o.labels_path);
    rfm::RealtimeResult res = rfm::realtime_detect(panel, rc);

    rfm::Matrix pm(res.probs.size(), 1);
    pm.col(0) = res.probs;
    rfm::write_matrix_csv((dir / "probs_realtime.csv").string(), pm, {"regime_2"}, panel.dates,
                          "date");
    write_points((dir / "turning_points.csv").string(), res.points);
    write_report((dir / "report.txt").string(), res.points, truth_events, res.failed_windows,
                 o.det, true);
}

} // namespace

void register_detect(CLI::App& app, GlobalOpts& g) {
    auto* cmd = app.add_subcommand("detect", "Turning points from regime probabilities");
    cmd->fallthrough();  // --seed/--jobs may trail the subcommand
    auto o = std::make_shared<DetectOpts>();
    cmd->add_option("--probs", o->probs_path, "CSV of regime probabilities (offline mode)");
    cmd->add_option("--column", o->column, "probability column (default regime_2)");
    cmd->add_option("--out", o->out_dir, "output directory")->required();
    cmd->add_option("--d", o->det.d, "moving-average order")->capture_default_str();
    auto* enter_opt =
        cmd->add_option("--enter", o->det.enter, "entry threshold (default 0.9, realtime 0.8)");
    auto* exit_opt =
        cmd->add_option("--exit", o->det.exit, "exit threshold (default 0.1, realtime 0.2)");
    cmd->add_option("--initial-phase", o->det.initial_phase, "starting phase, 0 or 1")
        ->capture_default_str();
    cmd->add_option("--truth-states", o->truth_states, "reference labels for the lag report");
    cmd->add_flag("--realtime", o->realtime, "expanding-window pipeline on a panel");
    cmd->add_option("--panel", o->panel_path, "panel CSV (realtime)");
    cmd->add_option("--warmup", o->warmup, "first evaluated period (realtime)");
    cmd->add_option("--stride", o->stride, "refit cadence (realtime)")->capture_default_str();
    cmd->add_option("--regimes", o->regimes, "regimes (realtime)")->capture_default_str();
    cmd->add_option("--factors", o->factors, "factors per regime (realtime)")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--trials", o->trials, "EM restarts per window (realtime, default 15)");
    cmd->add_option("--stay", o->stay, "filter Q diagonal (realtime)")->delimiter(',');
    cmd->add_option("--labels", o->labels_path, "known labels through each vintage (realtime)");
    cmd->callback([&g, o, enter_opt, exit_opt] {
        if (o->realtime) {
            if (o->panel_path.empty()) throw rfm::InvalidInput("--realtime needs --panel");
            if (enter_opt->count() == 0) o->det.enter = 0.8;
            if (exit_opt->count() == 0) o->det.exit = 0.2;
        } else if (o->probs_path.empty()) {
            throw rfm::InvalidInput("detect needs --probs, or --realtime with --panel");
        }
        run(*o, g);
    });
}

} // namespace cli
