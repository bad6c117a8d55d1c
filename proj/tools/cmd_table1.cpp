#include "common.hpp"

#include "rfm/em_dynamic.hpp"
#include "rfm/evaluate.hpp"

#include <cmath>
#include <fstream>

namespace cli {
namespace {

/// Grid CSV columns (header required, any order): dgp, pattern, n, t,
/// smoothed; optional rho, alpha, beta, r2, reps, trials. Each row is one
/// Monte Carlo cell.
std::vector<rfm::Table1Cell> load_grid(const std::string& path, std::uint64_t seed, int reps,
                                       int trials) {
    rfm::Table t = rfm::load_table(path);
    auto col = [&](const std::string& name) -> int {
        for (std::size_t c = 0; c < t.names.size(); ++c)
            if (t.names[c] == name) return static_cast<int>(c);
        return -1;
    };
    auto get = [&](Eigen::Index r, int c, double fallback) {
        if (c < 0) return fallback;
        double v = t.x(r, c);
        return std::isnan(v) ? fallback : v;
    };
    int c_dgp = col("dgp"), c_pat = col("pattern"), c_n = col("n"), c_t = col("t");
    int c_sm = col("smoothed"), c_rho = col("rho"), c_al = col("alpha"), c_be = col("beta");
    int c_r2 = col("r2"), c_reps = col("reps"), c_tr = col("trials");
    if (c_dgp < 0 || c_pat < 0 || c_n < 0 || c_t < 0)
        throw rfm::InvalidInput(path + ": grid needs dgp, pattern, n, t columns");
    std::vector<rfm::Table1Cell> grid;
    for (Eigen::Index r = 0; r < t.x.rows(); ++r) {
        rfm::Table1Cell cell;
        cell.sim.dgp = static_cast<int>(get(r, c_dgp, 0));
        cell.sim.pattern = static_cast<int>(get(r, c_pat, 0));
        cell.sim.n = static_cast<int>(get(r, c_n, 0));
        cell.sim.t = static_cast<int>(get(r, c_t, 0));
        cell.sim.rho = get(r, c_rho, 0.0);
        cell.sim.alpha = get(r, c_al, 0.0);
        cell.sim.beta = get(r, c_be, 0.0);
        cell.sim.r2 = get(r, c_r2, 0.5);
        cell.sim.seed = rfm::derive_seed(seed, static_cast<std::uint64_t>(r) + 0x7ab1e);
        cell.smoothed = get(r, c_sm, 1.0) != 0.0;
        cell.reps = static_cast<int>(get(r, c_reps, reps));
        cell.trials = static_cast<int>(get(r, c_tr, trials));
        grid.push_back(cell);
    }
    return grid;
}

void write_rows(const std::string& path, const std::vector<rfm::Table1Row>& rows) {
    std::ofstream out(path);
    if (!out) throw rfm::InvalidInput("cannot write " + path);
    out << "dgp,pattern,n,t,smoothed,reps,trials,r2_loadings_1,r2_loadings_2,r2_factors,"
           "r2_factors_rotated,class_mean_abs,class_sup_abs,q11_err,q22_err,failures\n";
    for (const auto& row : rows) {
        const auto& c = row.cell;
        out << c.sim.dgp << ',' << c.sim.pattern << ',' << c.sim.n << ',' << c.sim.t << ','
            << (c.smoothed ? 1 : 0) << ',' << c.reps << ',' << c.trials << ','
            << rfm::format_double(row.r2_l1) << ',' << rfm::format_double(row.r2_l2) << ','
            << rfm::format_double(row.r2_f) << ',' << rfm::format_double(row.r2_hf) << ','
            << rfm::format_double(row.class_mean) << ',' << rfm::format_double(row.class_sup)
            << ',' << (row.q11_err < 0 ? "" : rfm::format_double(row.q11_err)) << ','
            << (row.q22_err < 0 ? "" : rfm::format_double(row.q22_err)) << ',' << row.failures
            << '\n';
    }
}

void write_hist_samples(const std::string& dir, const rfm::StandardizedSample& s) {
    auto d = ensure_dir(dir);
    for (std::size_t j = 0; j < s.loading_errors.size(); ++j) {
        std::vector<std::string> cols;
        for (int p = 1; p <= s.loading_errors[j].cols(); ++p)
            cols.push_back("l" + std::to_string(p));
        rfm::write_matrix_csv((d / ("hist_loadings_" + std::to_string(j + 1) + ".csv")).string(),
                              s.loading_errors[j], cols);
    }
    std::vector<std::string> cols;
    for (int p = 1; p <= s.factor_errors.cols(); ++p) cols.push_back("f" + std::to_string(p));
    rfm::write_matrix_csv((d / "hist_factors.csv").string(), s.factor_errors, cols);
}

struct Table1Opts {
    std::string grid_path;
    std::string out_path = "table1.csv";
    std::string hist_dir;
    int reps = 100;
    int trials = 5;
    // single-cell flags, used when no grid file is given
    int dgp = 1, pattern = 2, n = 100, t = 300;
    double rho = 0, alpha = 0, beta = 0, r2 = 0.5;
    bool unsmoothed = false;
};

void run(const Table1Opts& o, const GlobalOpts& g) {
    std::vector<rfm::Table1Cell> grid;
    if (!o.grid_path.empty()) {
        grid = load_grid(o.grid_path, g.seed, o.reps, o.trials);
    } else {
        rfm::Table1Cell cell;
        cell.sim.dgp = o.dgp;
        cell.sim.pattern = o.pattern;
        cell.sim.n = o.n;
        cell.sim.t = o.t;
        cell.sim.rho = o.rho;
        cell.sim.alpha = o.alpha;
        cell.sim.beta = o.beta;
        cell.sim.r2 = o.r2;
        cell.sim.seed = rfm::derive_seed(g.seed, 0x7ab1e);
        cell.smoothed = !o.unsmoothed;
        cell.reps = o.reps;
        cell.trials = o.trials;
        grid.push_back(cell);
    }
    std::vector<rfm::Table1Row> rows = rfm::table1_run(grid, g.jobs);
    write_rows(o.out_path, rows);

    if (!o.hist_dir.empty()) {
        // Standardized estimation-error samples for the histogram plots,
        // refit per replication so the cell means above stay untouched.
        const rfm::Table1Cell& cell = grid.front();
        std::vector<rfm::FitResult> fits;
        std::vector<rfm::SimTruth> truths;
        for (int rep = 0; rep < cell.reps; ++rep) {
            rfm::SimConfig sc = cell.sim;
            sc.seed = rfm::derive_seed(cell.sim.seed, static_cast<std::uint64_t>(rep) + 1);
            rfm::SimTruth truth = rfm::simulate_panel(sc);
            rfm::FitConfig fc;
            fc.dims.assign(2, cell.sim.dgp == 3 ? 1 : 2);
            fc.n_trials = cell.trials;
            fc.seed = rfm::derive_seed(cell.sim.seed, 0x80000000ull + static_cast<std::uint64_t>(rep));
            fc.sigma2 = cell.sigma2;
            fc.jobs = g.jobs;
            rfm::FitResult fit = cell.smoothed
                                     ? rfm::fit_dynamic(truth.panel, rfm::markov_from_stay(cell.stay), fc)
                                     : rfm::fit_static(truth.panel, rfm::Vector(), fc);
            rfm::apply_permutation(fit, rfm::match_labels(fit.probs.marginal, truth.states));
            fits.push_back(std::move(fit));
            truths.push_back(std::move(truth));
        }
        write_hist_samples(o.hist_dir, rfm::standardized_estimates(fits, truths));
    }
}

} // namespace

void register_table1(CLI::App& app, GlobalOpts& g) {
    auto* cmd = app.add_subcommand("table1", "Monte Carlo study over a grid of cells");
    cmd->fallthrough();
    auto o = std::make_shared<Table1Opts>();
    cmd->add_option("--grid", o->grid_path, "grid CSV (dgp,pattern,n,t,smoothed,...)");
    cmd->add_option("--out", o->out_path, "results CSV")->capture_default_str();
    cmd->add_option("--reps", o->reps, "replications per cell")->capture_default_str();
    cmd->add_option("--trials", o->trials, "EM restarts per fit")->capture_default_str();
    cmd->add_option("--hist-dir", o->hist_dir,
                    "also write standardized error samples for the first cell (needs reps >= 30)");
    cmd->add_option("--dgp", o->dgp, "single-cell run: DGP")->capture_default_str();
    cmd->add_option("--pattern", o->pattern, "single-cell run: pattern")->capture_default_str();
    cmd->add_option("--n", o->n, "single-cell run: series")->capture_default_str();
    cmd->add_option("--t", o->t, "single-cell run: periods")->capture_default_str();
    cmd->add_option("--rho", o->rho, "single-cell run: factor AR(1)")->capture_default_str();
    cmd->add_option("--alpha", o->alpha, "single-cell run: error AR(1)")->capture_default_str();
    cmd->add_option("--beta", o->beta, "single-cell run: cross correlation")->capture_default_str();
    cmd->add_option("--r2", o->r2, "single-cell run: target R^2")->capture_default_str();
    cmd->add_flag("--unsmoothed", o->unsmoothed, "single-cell run: static EM");
    cmd->callback([&g, o] { run(*o, g); });
}

} // namespace cli
