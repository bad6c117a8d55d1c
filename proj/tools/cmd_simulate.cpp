#include "common.hpp"

#include "rfm/simulate.hpp"

#include <json.hpp>

#include <fstream>

namespace cli {

using nlohmann::ordered_json;

void write_states_csv(const std::string& path, const std::vector<int>& states,
                      const std::vector<std::string>& dates) {
    std::ofstream out(path);
    if (!out) throw rfm::InvalidInput("cannot write " + path);
    out << (dates.empty() ? "state" : "date,state") << '\n';
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!dates.empty()) out << dates[i] << ',';
        out << states[i] + 1 << '\n';
    }
}

namespace {

void run(const rfm::SimConfig& sc, const std::string& out_dir) {
    rfm::SimTruth truth = rfm::simulate_panel(sc);
    auto dir = ensure_dir(out_dir);
    if (sc.pattern == 1 && !sc.label_file) truth.panel.dates = rfm::nber_quarter_names();

    rfm::write_panel_csv((dir / "panel.csv").string(), truth.panel);
    std::vector<std::string> fnames;
    for (int p = 1; p <= truth.factors.cols(); ++p) fnames.push_back("f" + std::to_string(p));
    rfm::write_matrix_csv((dir / "truth_factors.csv").string(), truth.factors, fnames);
    for (std::size_t j = 0; j < truth.loadings.size(); ++j) {
        std::vector<std::string> lnames;
        for (int p = 1; p <= truth.loadings[j].cols(); ++p)
            lnames.push_back("l" + std::to_string(p));
        rfm::write_matrix_csv((dir / ("truth_loadings_" + std::to_string(j + 1) + ".csv")).string(),
                              truth.loadings[j], lnames, truth.panel.names, "series");
    }
    write_states_csv((dir / "truth_states.csv").string(), truth.states, truth.panel.dates);

    ordered_json meta;
    meta["n"] = sc.n;
    meta["t"] = sc.t;
    meta["dgp"] = sc.dgp;
    meta["pattern"] = sc.pattern;
    meta["rho"] = sc.rho;
    meta["alpha"] = sc.alpha;
    meta["beta"] = sc.beta;
    meta["r2"] = sc.r2;
    meta["seed"] = sc.seed;
    if (!truth.meta.breaks.empty()) meta["breaks"] = truth.meta.breaks;
    if (truth.meta.q0.size() > 0) {
        meta["q0"] = {{truth.meta.q0(0, 0), truth.meta.q0(0, 1)},
                      {truth.meta.q0(1, 0), truth.meta.q0(1, 1)}};
    }
    if (!truth.meta.source.empty()) meta["label_source"] = truth.meta.source;
    std::ofstream mj(dir / "truth_meta.json");
    mj << meta.dump(2) << '\n';
}

} // namespace

void register_simulate(CLI::App& app, GlobalOpts& g) {
    auto* cmd = app.add_subcommand("simulate", "Draw a synthetic panel and its ground truth");
    cmd->fallthrough();
    auto sc = std::make_shared<rfm::SimConfig>();
    auto out_dir = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    cmd->add_option("--out", *out_dir, "output directory")->required();
    cmd->add_option("--n", sc->n, "series count")->capture_default_str();
    cmd->add_option("--t", sc->t, "period count")->capture_default_str();
    cmd->add_option("--dgp", sc->dgp, "1, 2, or 3")->capture_default_str();
    cmd->add_option("--pattern", sc->pattern, "regime pattern 1..4")->capture_default_str();
    cmd->add_option("--rho", sc->rho, "factor AR(1)")->capture_default_str();
    cmd->add_option("--alpha", sc->alpha, "error AR(1)")->capture_default_str();
    cmd->add_option("--beta", sc->beta, "cross-sectional error correlation")->capture_default_str();
    cmd->add_option("--r2", sc->r2, "target regression R^2")->capture_default_str();
    cmd->add_option("--labels", *labels, "pattern-1 label file override");
    cmd->callback([&g, sc, out_dir, labels] {
        sc->seed = g.seed;
        if (!labels->empty()) sc->label_file = *labels;
        run(*sc, *out_dir);
    });
}

} // namespace cli
