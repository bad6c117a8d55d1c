#include "common.hpp"
#include "svg_plot.hpp"

#include "rfm/detect.hpp"

#include <cmath>
#include <fstream>

namespace cli {
namespace {

struct PlotOpts {
    std::string probs_path;
    std::string column;
    std::string states_path;
    std::string hist_path;
    std::string hist_column;
    std::string out_dir;
    int d = 0;
    int bins = 30;
    double enter = 0.0, exit = 0.0;  // 0 = no guide line
};

void run(const PlotOpts& o) {
    auto dir = ensure_dir(o.out_dir);
    if (!o.probs_path.empty()) {
        rfm::Vector probs = load_prob_column(o.probs_path, o.column);
        if (o.d > 0) probs = rfm::moving_average(probs, o.d);
        std::vector<std::pair<int, int>> shaded;
        std::vector<int> states;
        if (!o.states_path.empty()) {
            states = rfm::load_labels(o.states_path);
            if (static_cast<Eigen::Index>(states.size()) != probs.size())
                throw rfm::InvalidInput("states and probabilities disagree on length");
            int start = -1;
            for (std::size_t i = 0; i <= states.size(); ++i) {
                bool on = i < states.size() && states[i] == 1;
                if (on && start < 0) start = static_cast<int>(i);
                if (!on && start >= 0) {
                    shaded.push_back({start, static_cast<int>(i) - 1});
                    start = -1;
                }
            }
        }
        // Flat CSV mirror of the figure: period, probability, true state.
        std::ofstream csv(dir / "plot_probs.csv");
        if (!csv) throw rfm::InvalidInput("cannot write plot_probs.csv");
        csv << (states.empty() ? "period,prob" : "period,prob,state") << '\n';
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            csv << i + 1 << ',' << rfm::format_double(probs(i));
            if (!states.empty()) csv << ',' << states[static_cast<std::size_t>(i)] + 1;
            csv << '\n';
        }
        std::vector<double> guides;
        if (o.enter > 0) guides.push_back(o.enter);
        if (o.exit > 0) guides.push_back(o.exit);
        svg::prob_path((dir / "probs.svg").string(), probs, shaded, guides,
                       o.d > 0 ? "regime-2 probability (moving average)" : "regime-2 probability");
    }
    if (!o.hist_path.empty()) {
        rfm::Vector sample = load_prob_column(o.hist_path, o.hist_column);
        rfm::Matrix binned(o.bins, 2);
        double lo = std::min(sample.minCoeff(), -4.0);
        double hi = std::max(sample.maxCoeff(), 4.0);
        double width = (hi - lo) / o.bins;
        binned.col(1).setZero();
        for (int b = 0; b < o.bins; ++b) binned(b, 0) = lo + (b + 0.5) * width;
        for (Eigen::Index i = 0; i < sample.size(); ++i) {
            int b = std::min(o.bins - 1, static_cast<int>((sample(i) - lo) / width));
            binned(b, 1) += 1.0 / (static_cast<double>(sample.size()) * width);
        }
        rfm::write_matrix_csv((dir / "hist_bins.csv").string(), binned, {"center", "density"});
        svg::histogram((dir / "hist.svg").string(), sample, o.bins,
                       "standardized estimation errors");
    }
    if (o.probs_path.empty() && o.hist_path.empty())
        throw rfm::InvalidInput("plotdata needs --probs or --hist");
}

} // namespace

void register_plotdata(CLI::App& app, GlobalOpts&) {
    auto* cmd = app.add_subcommand("plotdata", "CSV + SVG for probability paths and histograms");
    cmd->fallthrough();
    auto o = std::make_shared<PlotOpts>();
    cmd->add_option("--probs", o->probs_path, "probability CSV (fit or realtime output)");
    cmd->add_option("--column", o->column, "probability column (default regime_2)");
    cmd->add_option("--states", o->states_path, "true labels to shade regime-2 spans");
    cmd->add_option("--d", o->d, "moving-average order to apply first")->capture_default_str();
    cmd->add_option("--enter", o->enter, "draw the entry threshold guide");
    cmd->add_option("--exit", o->exit, "draw the exit threshold guide");
    cmd->add_option("--hist", o->hist_path, "sample CSV for a histogram");
    cmd->add_option("--hist-column", o->hist_column, "sample column (default the only one)");
    cmd->add_option("--bins", o->bins, "histogram bins")->capture_default_str();
    cmd->add_option("--out", o->out_dir, "output directory")->required();
    cmd->callback([o] { run(*o); });
}

} // namespace cli
