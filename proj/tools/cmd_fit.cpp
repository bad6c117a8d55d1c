#include "common.hpp"

#include "rfm/em_dynamic.hpp"
#include "rfm/em_static.hpp"

#include <json.hpp>

#include <fstream>

namespace cli {

using nlohmann::ordered_json;

rfm::Vector load_prob_column(const std::string& path, const std::string& column) {
    rfm::Table t = rfm::load_table(path);
    std::string want = column;
    if (want.empty()) {
        if (t.names.size() == 1) want = t.names[0];
        else want = "regime_2";
    }
    // NaN entries pass through: realtime output is NaN before warmup, and
    // every consumer treats NaN as a gap.
    for (std::size_t c = 0; c < t.names.size(); ++c)
        if (t.names[c] == want) return t.x.col(static_cast<Eigen::Index>(c));
    throw rfm::InvalidInput(path + ": no column named " + want);
}

namespace {

struct FitOpts {
    std::string panel_path;
    std::string out_dir;
    std::string mode = "dynamic";
    int regimes = 2;
    std::vector<int> factors = {1};
    int trials = -1;
    double tol = 1e-7;
    int max_iter = 500;
    std::string sigma2 = "estimate";
    double sigma2_value = 1.0;
    double clamp = 10.0;
    std::vector<double> q;
    std::vector<double> stay;
    std::vector<double> phi;
    bool update_q = false;
    bool update_transition = false;
};

std::vector<std::string> regime_headers(int j) {
    std::vector<std::string> h;
    for (int k = 1; k <= j; ++k) h.push_back("regime_" + std::to_string(k));
    return h;
}

void write_pairwise(const std::string& path, const rfm::ProbSeries& probs) {
    std::ofstream out(path);
    if (!out) throw rfm::InvalidInput("cannot write " + path);
    out << "t,to,from,prob\n";
    for (std::size_t i = 0; i < probs.pairwise.size(); ++i) {
        const rfm::Matrix& pw = probs.pairwise[i];
        for (Eigen::Index j = 0; j < pw.rows(); ++j)
            for (Eigen::Index k = 0; k < pw.cols(); ++k)
                // row t of the CSV holds Pr(z_{t+1}=to, z_t=from), 1-based t
                out << i + 2 << ',' << j + 1 << ',' << k + 1 << ','
                    << rfm::format_double(pw(j, k)) << '\n';
    }
}

void run(const FitOpts& o, const GlobalOpts& g) {
    rfm::Panel panel = rfm::load_panel(o.panel_path);
    auto dir = ensure_dir(o.out_dir);

    rfm::FitConfig fc;
    fc.dims = o.factors;
    if (static_cast<int>(fc.dims.size()) == 1 && o.regimes > 1)
        fc.dims.assign(static_cast<std::size_t>(o.regimes), o.factors[0]);
    if (static_cast<int>(fc.dims.size()) != o.regimes)
        throw rfm::InvalidInput("--factors needs one entry, or one per regime");
    fc.tol = o.tol;
    fc.max_iter = o.max_iter;
    fc.seed = g.seed;
    fc.jobs = g.jobs;
    bool dynamic = o.mode == "dynamic";
    fc.n_trials = o.trials > 0 ? o.trials : (dynamic ? 15 : 30);
    if (o.sigma2 == "fixed")
        fc.sigma2 = rfm::Sigma2Mode::Fixed(o.sigma2_value);
    else if (o.sigma2 == "estimate")
        fc.sigma2 = rfm::Sigma2Mode::Estimated(o.clamp);
    else
        throw rfm::InvalidInput("--sigma2 must be fixed or estimate");
    fc.iterate_q = o.update_q;
    fc.iterate_transition = o.update_transition;

    rfm::FitResult fit;
    if (dynamic) {
        rfm::MarkovState mk;
        if (!o.stay.empty()) {
            rfm::Vector phi;
            if (!o.phi.empty())
                phi = Eigen::Map<const rfm::Vector>(o.phi.data(),
                                                    static_cast<Eigen::Index>(o.phi.size()));
            mk = rfm::markov_from_stay(o.stay, phi);
        } else {
            mk = rfm::uniform_markov(o.regimes);
        }
        fit = rfm::fit_dynamic(panel, mk, fc);
    } else if (o.mode == "static") {
        rfm::Vector q;
        if (!o.q.empty())
            q = Eigen::Map<const rfm::Vector>(o.q.data(), static_cast<Eigen::Index>(o.q.size()));
        fit = rfm::fit_static(panel, q, fc);
    } else {
        throw rfm::InvalidInput("--mode must be static or dynamic");
    }

    const int j = fit.params.regimes();
    for (int k = 0; k < j; ++k) {
        std::vector<std::string> lnames;
        for (int p = 1; p <= fit.params.lambda[static_cast<std::size_t>(k)].cols(); ++p)
            lnames.push_back("l" + std::to_string(p));
        rfm::write_matrix_csv((dir / ("loadings_" + std::to_string(k + 1) + ".csv")).string(),
                              fit.params.lambda[static_cast<std::size_t>(k)], lnames, panel.names,
                              "series");
    }
    rfm::write_matrix_csv((dir / "probs.csv").string(), fit.probs.marginal, regime_headers(j),
                          panel.dates, "date");
    std::vector<std::string> fnames;
    for (int p = 1; p <= fit.factors.cols(); ++p) fnames.push_back("f" + std::to_string(p));
    rfm::write_matrix_csv((dir / "factors.csv").string(), fit.factors, fnames, panel.dates, "date");

    {
        rfm::Matrix trace(static_cast<Eigen::Index>(fit.loglik_trace.size()), 1);
        std::vector<std::string> iters;
        for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i) {
            trace(static_cast<Eigen::Index>(i), 0) = fit.loglik_trace[i];
            iters.push_back(std::to_string(i + 1));
        }
        rfm::write_matrix_csv((dir / "loglik_trace.csv").string(), trace, {"loglik"}, iters,
                              "iter");
    }

    ordered_json info;
    info["mode"] = o.mode;
    info["regimes"] = j;
    info["factors"] = fc.dims;
    info["trials"] = fc.n_trials;
    info["tol"] = fc.tol;
    info["max_iter"] = fc.max_iter;
    info["seed"] = fc.seed;
    info["sigma2_mode"] = fc.sigma2.fixed ? "fixed" : "estimate";
    if (dynamic) {
        rfm::MarkovState est = rfm::estimate_transition(fit.probs);
        write_pairwise((dir / "pairwise_probs.csv").string(), fit.probs);
        rfm::Matrix qm(j + 1, j);
        qm.topRows(j) = est.Q;
        qm.bottomRows(1) = est.phi.transpose();
        std::vector<std::string> rows;
        for (int k = 1; k <= j; ++k) rows.push_back("to_" + std::to_string(k));
        rows.push_back("phi");
        std::vector<std::string> cols;
        for (int k = 1; k <= j; ++k) cols.push_back("from_" + std::to_string(k));
        rfm::write_matrix_csv((dir / "qhat_or_Q.csv").string(), qm, cols, rows, "");
        const auto& mk = std::get<rfm::MarkovState>(fit.state);
        info["filter_Q_diag"] = std::vector<double>{};
        for (int k = 0; k < j; ++k) info["filter_Q_diag"].push_back(mk.Q(k, k));
    } else {
        rfm::Vector qhat = rfm::estimate_q(fit.probs);
        rfm::write_matrix_csv((dir / "qhat_or_Q.csv").string(), qhat.transpose(),
                              regime_headers(j));
    }
    info["loglik"] = fit.loglik_trace.back();
    info["iterations"] = fit.iterations;
    info["converged"] = fit.converged;
    info["winning_trial"] = fit.trial_index;
    info["sigma2"] = fit.params.sigma2;
    std::ofstream fj(dir / "fit.json");
    fj << info.dump(2) << '\n';

    if (!fit.converged)
        throw rfm::ConvergenceError("fit reached max_iter with the likelihood still moving "
                                    "(outputs were written)");
}

} // namespace

void register_fit(CLI::App& app, GlobalOpts& g) {
    auto* cmd = app.add_subcommand("fit", "Estimate the model by EM");
    cmd->fallthrough();
    auto o = std::make_shared<FitOpts>();
    cmd->add_option("--panel", o->panel_path, "input panel CSV (balanced)")->required();
    cmd->add_option("--out", o->out_dir, "output directory")->required();
    cmd->add_option("--mode", o->mode, "static (unsmoothed) or dynamic (smoothed)")
        ->capture_default_str();
    cmd->add_option("--regimes", o->regimes, "number of regimes")->capture_default_str();
    cmd->add_option("--factors", o->factors, "factors per regime, one value or one per regime")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--trials", o->trials, "random restarts (default 15 dynamic, 30 static)");
    cmd->add_option("--tol", o->tol, "relative loglik tolerance")->capture_default_str();
    cmd->add_option("--max-iter", o->max_iter, "EM iteration cap")->capture_default_str();
    cmd->add_option("--sigma2", o->sigma2, "fixed or estimate")->capture_default_str();
    cmd->add_option("--sigma2-value", o->sigma2_value, "value when --sigma2 fixed")
        ->capture_default_str();
    cmd->add_option("--clamp", o->clamp, "sigma2 estimate kept in [1/C^2, C^2]")
        ->capture_default_str();
    cmd->add_option("--q", o->q, "static mixing weights (default uniform)")->delimiter(',');
    cmd->add_option("--stay", o->stay, "dynamic filter Q diagonal (default uniform)")->delimiter(',');
    cmd->add_option("--phi", o->phi, "dynamic initial distribution (default uniform)")->delimiter(',');
    cmd->add_flag("--update-q", o->update_q, "re-estimate q every iteration");
    cmd->add_flag("--update-transition", o->update_transition,
                  "re-estimate (Q, phi) every iteration");
    cmd->callback([&g, o] { run(*o, g); });
}

} // namespace cli
