#include "common.hpp"

#include "rfm/em_dynamic.hpp"
#include "rfm/evaluate.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

rfm::Matrix read_matrix(const std::string& path) {
    rfm::Table t = rfm::load_table(path);
    if (!t.x.allFinite()) throw rfm::InvalidInput(path + ": missing values");
    return t.x;
}

rfm::SimTruth load_truth(const fs::path& dir) {
    rfm::SimTruth truth;
    {
        rfm::Table t = rfm::load_table((dir / "panel.csv").string());
        truth.panel.x = t.x;
        truth.panel.names = t.names;
        truth.panel.dates = t.dates;
    }
    truth.factors = read_matrix((dir / "truth_factors.csv").string());
    for (int j = 1;; ++j) {
        fs::path p = dir / ("truth_loadings_" + std::to_string(j) + ".csv");
        if (!fs::exists(p)) break;
        truth.loadings.push_back(read_matrix(p.string()));
    }
    if (truth.loadings.empty()) throw rfm::InvalidInput("no truth_loadings_*.csv in " + dir.string());
    truth.states = rfm::load_labels((dir / "truth_states.csv").string());
    fs::path meta = dir / "truth_meta.json";
    if (fs::exists(meta)) {
        std::ifstream in(meta);
        json m = json::parse(in);
        if (m.contains("q0")) {
            truth.meta.q0.resize(2, 2);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) truth.meta.q0(a, b) = m["q0"][a][b].get<double>();
        }
        if (m.contains("pattern")) truth.config.pattern = m["pattern"].get<int>();
    }
    return truth;
}

rfm::FitResult load_fit(const fs::path& dir) {
    rfm::FitResult fit;
    std::ifstream in(dir / "fit.json");
    if (!in) throw rfm::InvalidInput("no fit.json in " + dir.string());
    json info = json::parse(in);
    fit.params.sigma2 = info["sigma2"].get<double>();
    fit.converged = info["converged"].get<bool>();
    fit.iterations = info["iterations"].get<int>();
    for (int j = 1;; ++j) {
        fs::path p = dir / ("loadings_" + std::to_string(j) + ".csv");
        if (!fs::exists(p)) break;
        fit.params.lambda.push_back(read_matrix(p.string()));
    }
    if (fit.params.lambda.empty()) throw rfm::InvalidInput("no loadings_*.csv in " + dir.string());
    fit.probs.marginal = read_matrix((dir / "probs.csv").string());
    fit.factors = read_matrix((dir / "factors.csv").string());

    fs::path pw = dir / "pairwise_probs.csv";
    if (fs::exists(pw)) {
        rfm::Table t = rfm::load_table(pw.string());
        // columns t,to,from,prob; t is 1-based period z_{t} enters
        const int j = static_cast<int>(fit.probs.marginal.cols());
        const auto periods = fit.probs.marginal.rows();
        fit.probs.pairwise.assign(static_cast<std::size_t>(periods - 1),
                                  rfm::Matrix::Zero(j, j));
        for (Eigen::Index r = 0; r < t.x.rows(); ++r) {
            int tt = static_cast<int>(t.x(r, 0)) - 2;
            int to = static_cast<int>(t.x(r, 1)) - 1;
            int from = static_cast<int>(t.x(r, 2)) - 1;
            if (tt < 0 || tt >= periods - 1 || to < 0 || to >= j || from < 0 || from >= j)
                throw rfm::InvalidInput("pairwise_probs.csv: index out of range");
            fit.probs.pairwise[static_cast<std::size_t>(tt)](to, from) = t.x(r, 3);
        }
        rfm::MarkovState mk;
        mk.Q = read_matrix((dir / "qhat_or_Q.csv").string()).topRows(j);
        mk.phi = fit.probs.marginal.row(0).transpose();
        fit.state = mk;
    } else {
        rfm::StaticState st;
        st.q = fit.probs.marginal.colwise().mean().transpose();
        fit.state = st;
    }
    return fit;
}

void run(const std::string& truth_dir, const std::string& fit_dir, const std::string& out_path) {
    rfm::SimTruth truth = load_truth(truth_dir);
    rfm::FitResult fit = load_fit(fit_dir);
    if (truth.panel.periods() != fit.probs.marginal.rows())
        throw rfm::InvalidInput("truth and fit cover different period counts");

    rfm::apply_permutation(fit, rfm::match_labels(fit.probs.marginal, truth.states));
    rfm::RotationSet rot = rfm::compute_rotations(truth, fit);

    const int j = fit.params.regimes();
    std::vector<std::string> cols;
    rfm::Matrix row(1, j + 4 + (j == 2 ? 2 : 0));
    int c = 0;
    for (int k = 0; k < j; ++k) {
        cols.push_back("r2_loadings_" + std::to_string(k + 1));
        row(0, c++) = rfm::r2_loading_space(truth, fit, k);
    }
    cols.push_back("r2_factors");
    row(0, c++) = rfm::r2_factors(truth, fit, false);
    cols.push_back("r2_factors_rotated");
    row(0, c++) = rfm::r2_factors(truth, fit, true, &rot);
    rfm::ClassificationReport rep = rfm::classification_report(truth, fit.probs.marginal);
    cols.push_back("class_mean_abs");
    row(0, c++) = rep.mean_abs_error;
    cols.push_back("class_sup_abs");
    row(0, c++) = rep.sup_abs_error;
    if (j == 2) {
        cols.push_back("q11_err");
        cols.push_back("q22_err");
        if (!fit.probs.pairwise.empty() &&
            (truth.config.pattern == 4 ? truth.meta.q0.size() > 0 : truth.config.pattern == 1)) {
            rfm::MarkovState est = rfm::estimate_transition(fit.probs);
            double q11_0 = truth.config.pattern == 4 ? truth.meta.q0(0, 0) : 0.95;
            double q22_0 = truth.config.pattern == 4 ? truth.meta.q0(1, 1) : 0.72;
            row(0, c++) = std::abs(est.Q(0, 0) - q11_0);
            row(0, c++) = std::abs(est.Q(1, 1) - q22_0);
        } else {
            row(0, c++) = std::nan("");
            row(0, c++) = std::nan("");
        }
    }
    rfm::write_matrix_csv(out_path, row, cols);
}

} // namespace

void register_eval(CLI::App& app, GlobalOpts&) {
    auto* cmd = app.add_subcommand("eval", "Score a fit against simulation truth");
    cmd->fallthrough();
    auto truth_dir = std::make_shared<std::string>();
    auto fit_dir = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("--truth", *truth_dir, "simulate output directory")->required();
    cmd->add_option("--fit", *fit_dir, "fit output directory")->required();
    cmd->add_option("--out", *out_path, "metrics CSV path")->required();
    cmd->callback([truth_dir, fit_dir, out_path] {
        ensure_dir(fs::path(*out_path).parent_path().string().empty()
                       ? "."
                       : fs::path(*out_path).parent_path().string());
        run(*truth_dir, *fit_dir, *out_path);
    });
}

} // namespace cli
