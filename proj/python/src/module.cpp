// Python bindings. Eigen matrices cross as numpy arrays (copies), struct
// fields are plain attributes, and the C++ error taxonomy maps onto Python
// exception types: InvalidInput -> ValueError, NumericalError ->
// ArithmeticError, ConvergenceError -> RuntimeError. Long-running entry
// points release the GIL; none of them call back into Python.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rfm/data_io.hpp"
#include "rfm/density.hpp"
#include "rfm/detect.hpp"
#include "rfm/em_dynamic.hpp"
#include "rfm/em_static.hpp"
#include "rfm/evaluate.hpp"
#include "rfm/rng.hpp"
#include "rfm/simulate.hpp"
#include "rfm/types.hpp"

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace rfm;

namespace {

std::string repr_turning_point(const TurningPoint& p) {
    std::ostringstream os;
    os << "TurningPoint(t=" << p.t << ", direction=" << (p.direction > 0 ? "+1" : "-1")
       << ", detection_lag=" << p.detection_lag << ")";
    return os.str();
}

std::string repr_fit_result(const FitResult& f) {
    std::ostringstream os;
    os << "FitResult(regimes=" << f.params.regimes() << ", iterations=" << f.iterations
       << ", converged=" << (f.converged ? "True" : "False")
       << ", loglik=" << (f.loglik_trace.empty() ? 0.0 : f.loglik_trace.back()) << ")";
    return os.str();
}

} // namespace

PYBIND11_MODULE(_rfm, m) {
    m.doc() = "High-dimensional factor models with regime-switching loadings: "
              "simulation, EM estimation (static and Markov-smoothed), regime "
              "probability smoothing, and turning-point detection.";
    m.attr("__version__") = "0.1.0";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    // ---- core types ----

    py::class_<Panel>(m, "Panel", "Observed data block; rows are periods, columns are series.")
        .def(py::init([](Matrix x, std::vector<std::string> names, std::vector<std::string> dates) {
                 return Panel{std::move(x), std::move(names), std::move(dates)};
             }),
             py::arg("x"), py::arg("names") = std::vector<std::string>{},
             py::arg("dates") = std::vector<std::string>{})
        .def_readwrite("x", &Panel::x)
        .def_readwrite("names", &Panel::names)
        .def_readwrite("dates", &Panel::dates)
        .def_property_readonly("periods", [](const Panel& p) { return p.periods(); })
        .def_property_readonly("series", [](const Panel& p) { return p.series(); });

    py::class_<RegimeParams>(m, "RegimeParams",
                             "Per-regime loadings (N x r_j each) plus the shared "
                             "idiosyncratic variance.")
        .def(py::init([](std::vector<Matrix> loadings, double sigma2) {
                 return RegimeParams{std::move(loadings), sigma2};
             }),
             py::arg("loadings"), py::arg("sigma2") = 1.0)
        .def_readwrite("loadings", &RegimeParams::lambda)
        .def_readwrite("sigma2", &RegimeParams::sigma2)
        .def_property_readonly("regimes", &RegimeParams::regimes)
        .def("rank", &RegimeParams::rank, py::arg("j"));

    py::class_<StaticState>(m, "StaticState", "Time-invariant mixing weights q.")
        .def(py::init([](Vector q) { return StaticState{std::move(q)}; }), py::arg("q"))
        .def_readwrite("q", &StaticState::q);

    py::class_<MarkovState>(m, "MarkovState",
                            "First-order chain: Q(j, k) = Pr(z_t = j | z_{t-1} = k), "
                            "columns sum to one; phi is the initial distribution.")
        .def(py::init([](Matrix q, Vector phi) { return MarkovState{std::move(q), std::move(phi)}; }),
             py::arg("Q") = Matrix(), py::arg("phi") = Vector())
        .def_readwrite("Q", &MarkovState::Q)
        .def_readwrite("phi", &MarkovState::phi);

    py::class_<ProbSeries>(m, "ProbSeries",
                           "Regime probabilities: marginal is T x J with rows summing to "
                           "one; pairwise, when present, has T-1 entries with "
                           "pairwise[t][j, k] = Pr(z_{t+2} = j, z_{t+1} = k | info).")
        .def(py::init<>())
        .def_readwrite("marginal", &ProbSeries::marginal)
        .def_readwrite("pairwise", &ProbSeries::pairwise);

    py::class_<FitResult>(m, "FitResult",
                          "Estimation output: parameters, state model, posterior "
                          "probabilities, factor estimates, and the loglik trace.")
        .def(py::init<>())
        .def_readwrite("params", &FitResult::params)
        .def_readwrite("state", &FitResult::state)
        .def_readwrite("probs", &FitResult::probs)
        .def_readwrite("factors", &FitResult::factors)
        .def_readwrite("loglik_trace", &FitResult::loglik_trace)
        .def_readwrite("iterations", &FitResult::iterations)
        .def_readwrite("converged", &FitResult::converged)
        .def_readwrite("trial_index", &FitResult::trial_index)
        .def("__repr__", &repr_fit_result);

    // ---- estimation configuration ----

    py::class_<Sigma2Mode>(m, "Sigma2Mode",
                           "Idiosyncratic-variance handling: fixed at a value, or "
                           "estimated with the clamp [1/C^2, C^2].")
        .def_static("fixed", &Sigma2Mode::Fixed, py::arg("value"))
        .def_static("estimated", &Sigma2Mode::Estimated, py::arg("clamp_c") = 10.0)
        .def_readwrite("is_fixed", &Sigma2Mode::fixed)
        .def_readwrite("value", &Sigma2Mode::value)
        .def_readwrite("clamp_c", &Sigma2Mode::clamp_c);

    py::class_<FitConfig>(m, "FitConfig",
                          "EM settings: per-regime ranks, stopping rule, restarts, "
                          "seed, and optional warm starts (trial 0 only).")
        .def(py::init([](std::vector<int> dims, double tol, int max_iter, int n_trials,
                         std::uint64_t seed, int jobs, Sigma2Mode sigma2, bool iterate_q,
                         bool iterate_transition, std::optional<RegimeParams> init_params,
                         std::optional<Matrix> init_probs) {
                 FitConfig c;
                 c.dims = std::move(dims);
                 c.tol = tol;
                 c.max_iter = max_iter;
                 c.n_trials = n_trials;
                 c.seed = seed;
                 c.jobs = jobs;
                 c.sigma2 = sigma2;
                 c.iterate_q = iterate_q;
                 c.iterate_transition = iterate_transition;
                 c.init_params = std::move(init_params);
                 c.init_probs = std::move(init_probs);
                 return c;
             }),
             py::arg("dims"), py::arg("tol") = 1e-7, py::arg("max_iter") = 500,
             py::arg("n_trials") = 30, py::arg("seed") = 0, py::arg("jobs") = 1,
             py::arg("sigma2") = Sigma2Mode::Estimated(), py::arg("iterate_q") = false,
             py::arg("iterate_transition") = false, py::arg("init_params") = py::none(),
             py::arg("init_probs") = py::none())
        .def_readwrite("dims", &FitConfig::dims)
        .def_readwrite("tol", &FitConfig::tol)
        .def_readwrite("max_iter", &FitConfig::max_iter)
        .def_readwrite("n_trials", &FitConfig::n_trials)
        .def_readwrite("seed", &FitConfig::seed)
        .def_readwrite("jobs", &FitConfig::jobs)
        .def_readwrite("sigma2", &FitConfig::sigma2)
        .def_readwrite("iterate_q", &FitConfig::iterate_q)
        .def_readwrite("iterate_transition", &FitConfig::iterate_transition)
        .def_readwrite("init_params", &FitConfig::init_params)
        .def_readwrite("init_probs", &FitConfig::init_probs);

    // ---- simulation ----

    py::class_<SimConfig>(m, "SimConfig",
                          "Synthetic-panel settings: size, DGP (1-3), regime pattern "
                          "(1-4), AR coefficients, target R^2, seed.")
        .def(py::init([](int n, int t, int dgp, int pattern, double rho, double alpha,
                         double beta, double r2, std::uint64_t seed,
                         std::optional<std::string> label_file) {
                 SimConfig c;
                 c.n = n;
                 c.t = t;
                 c.dgp = dgp;
                 c.pattern = pattern;
                 c.rho = rho;
                 c.alpha = alpha;
                 c.beta = beta;
                 c.r2 = r2;
                 c.seed = seed;
                 c.label_file = std::move(label_file);
                 return c;
             }),
             py::arg("n") = 100, py::arg("t") = 300, py::arg("dgp") = 3,
             py::arg("pattern") = 2, py::arg("rho") = 0.0, py::arg("alpha") = 0.0,
             py::arg("beta") = 0.0, py::arg("r2") = 0.5, py::arg("seed") = 0,
             py::arg("label_file") = py::none())
        .def_readwrite("n", &SimConfig::n)
        .def_readwrite("t", &SimConfig::t)
        .def_readwrite("dgp", &SimConfig::dgp)
        .def_readwrite("pattern", &SimConfig::pattern)
        .def_readwrite("rho", &SimConfig::rho)
        .def_readwrite("alpha", &SimConfig::alpha)
        .def_readwrite("beta", &SimConfig::beta)
        .def_readwrite("r2", &SimConfig::r2)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("label_file", &SimConfig::label_file);

    py::class_<PatternMeta>(m, "PatternMeta",
                            "Pattern bookkeeping: break dates (patterns 2-3), the true "
                            "transition matrix (pattern 4), label provenance (pattern 1).")
        .def(py::init<>())
        .def_readwrite("breaks", &PatternMeta::breaks)
        .def_readwrite("q0", &PatternMeta::q0)
        .def_readwrite("source", &PatternMeta::source);

    py::class_<SimTruth>(m, "SimTruth",
                         "A simulated panel together with everything that generated it.")
        .def(py::init<>())
        .def_readwrite("panel", &SimTruth::panel)
        .def_readwrite("factors", &SimTruth::factors)
        .def_readwrite("loadings", &SimTruth::loadings)
        .def_readwrite("states", &SimTruth::states)
        .def_readwrite("meta", &SimTruth::meta)
        .def_readwrite("config", &SimTruth::config);

    m.def("simulate_panel", &simulate_panel, py::arg("config"),
          py::call_guard<py::gil_scoped_release>(),
          "Draw one synthetic panel with its full truth record.");
    m.def("nber_quarterly_labels", &nber_quarterly_labels,
          "Embedded quarterly recession indicator, 300 quarters from 1945Q2.");
    m.def("nber_quarter_names", &nber_quarter_names,
          "Quarter labels ('YYYYQq') aligned with nber_quarterly_labels().");
    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("tag"),
          "Deterministic sub-seed for a tagged purpose; distinct tags give "
          "independent streams.");

    // ---- densities and likelihoods ----

    m.def("regime_log_density", &regime_log_density, py::arg("x"), py::arg("loadings"),
          py::arg("sigma2"), "Log density of one observation under one regime.");
    m.def("log_density_matrix", &log_density_matrix, py::arg("x"), py::arg("params"),
          py::call_guard<py::gil_scoped_release>(),
          "T x J matrix of per-regime log densities.");
    m.def("mixture_loglik", &mixture_loglik, py::arg("panel"), py::arg("params"), py::arg("q"),
          py::call_guard<py::gil_scoped_release>(),
          "Static mixture log likelihood via log-sum-exp.");
    m.def("full_markov_loglik", &full_markov_loglik, py::arg("panel"), py::arg("params"),
          py::arg("markov"), py::call_guard<py::gil_scoped_release>(),
          "Exact Markov-model log likelihood through the forward filter.");

    // ---- EM: static ----

    m.def("e_step_static", &e_step_static, py::arg("panel"), py::arg("params"), py::arg("q"),
          py::call_guard<py::gil_scoped_release>(),
          "Posterior regime probabilities for the static model.");
    m.def("weighted_covariance", &weighted_covariance, py::arg("x"), py::arg("weights"),
          "S = sum_t w_t x_t x_t' / sum_t w_t.");
    m.def(
        "m_step",
        [](const Matrix& x, const Matrix& weights, const std::vector<int>& dims,
           const Sigma2Mode& mode, double sigma2_start) {
            return m_step(x, weights, dims, mode, sigma2_start);
        },
        py::arg("x"), py::arg("weights"), py::arg("dims"),
        py::arg("sigma2") = Sigma2Mode::Estimated(), py::arg("sigma2_start") = 1.0,
        py::call_guard<py::gil_scoped_release>(),
        "Full M-step: weighted covariances, then the loadings/sigma2 fixed point.");
    m.def(
        "fit_static",
        [](const Panel& panel, const FitConfig& config, const Vector& q) {
            return fit_static(panel, q, config);
        },
        py::arg("panel"), py::arg("config"), py::arg("q") = Vector(),
        py::call_guard<py::gil_scoped_release>(),
        "EM for the static (unsmoothed) model; empty q means uniform weights.");
    m.def("estimate_q", &estimate_q, py::arg("probs"),
          "Mixing-weight estimate: column means of the posteriors.");
    m.def("estimate_factors_static", &estimate_factors_static, py::arg("panel"),
          py::arg("params"), py::arg("probs"), py::call_guard<py::gil_scoped_release>(),
          "Posterior-weighted reduced-GLS factor estimates.");

    // ---- EM: Markov ----

    m.def("hamilton_filter", &hamilton_filter, py::arg("panel"), py::arg("params"),
          py::arg("markov"), py::arg("want_pairwise") = false,
          py::call_guard<py::gil_scoped_release>(),
          "Forward filter; returns filtered/predicted probabilities and the "
          "conditional log likelihoods.");
    m.def("smoother", &smoother, py::arg("filter_out"), py::arg("markov"),
          py::call_guard<py::gil_scoped_release>(),
          "Backward smoother on a filter output; both margins of the pairwise "
          "array are exact.");
    m.def(
        "fit_dynamic",
        [](const Panel& panel, const FitConfig& config, const MarkovState& markov) {
            return fit_dynamic(panel, markov, config);
        },
        py::arg("panel"), py::arg("config"), py::arg("markov") = MarkovState{},
        py::call_guard<py::gil_scoped_release>(),
        "EM with smoothed weights under the given (Q, phi); an empty markov "
        "means uniform.");
    m.def("estimate_transition", &estimate_transition, py::arg("probs"),
          "Transition estimate from pairwise smoothed probabilities.");
    m.def("estimate_factors_dynamic", &estimate_factors_dynamic, py::arg("panel"),
          py::arg("params"), py::arg("probs"), py::call_guard<py::gil_scoped_release>(),
          "Reduced-GLS factor estimates with smoothed weights.");
    m.def("uniform_markov", &uniform_markov, py::arg("j"), "Uniform Q and phi for J regimes.");
    m.def("markov_from_stay", &markov_from_stay, py::arg("stay"), py::arg("phi") = Vector(),
          "Two-regime chain from diagonal stay probabilities.");

    py::class_<FilterOutput>(m, "FilterOutput",
                             "Forward-filter record: filtered and predicted probabilities, "
                             "per-period conditional log likelihoods, optional pairwise.")
        .def(py::init<>())
        .def_readwrite("filtered", &FilterOutput::filtered)
        .def_readwrite("predicted", &FilterOutput::predicted)
        .def_readwrite("cond_loglik", &FilterOutput::cond_loglik)
        .def_readwrite("pairwise", &FilterOutput::pairwise);

    // ---- detection ----

    py::class_<DetectorConfig>(m, "DetectorConfig",
                               "Hysteresis rule: moving-average order d and the "
                               "enter/exit thresholds.")
        .def(py::init([](int d, double enter, double exit, int initial_phase) {
                 return DetectorConfig{d, enter, exit, initial_phase};
             }),
             py::arg("d") = 3, py::arg("enter") = 0.9, py::arg("exit") = 0.1,
             py::arg("initial_phase") = 0)
        .def_readwrite("d", &DetectorConfig::d)
        .def_readwrite("enter", &DetectorConfig::enter)
        .def_readwrite("exit", &DetectorConfig::exit)
        .def_readwrite("initial_phase", &DetectorConfig::initial_phase);

    py::class_<TurningPoint>(m, "TurningPoint",
                             "One detected regime change: 0-based event date, direction "
                             "(+1 into regime 2), and the detection lag in periods.")
        .def(py::init<>())
        .def_readwrite("t", &TurningPoint::t)
        .def_readwrite("direction", &TurningPoint::direction)
        .def_readwrite("detection_lag", &TurningPoint::detection_lag)
        .def("__repr__", &repr_turning_point);

    m.def("moving_average", &moving_average, py::arg("probs"), py::arg("d"),
          "Backward moving average over d+1 terms; the window shrinks at the "
          "left boundary and across NaN entries.");
    m.def("detect_turning_points", &detect_turning_points, py::arg("probs"), py::arg("config"),
          "Hysteresis rule on an already averaged probability series.");
    m.def("detect_with_ma", &detect_with_ma, py::arg("probs"), py::arg("config"),
          "moving_average then detect_turning_points with the same d.");

    py::class_<RealtimeConfig>(m, "RealtimeConfig",
                               "Expanding-window settings: warmup, refit stride, detector "
                               "thresholds, per-window EM config, filter stay "
                               "probabilities, optional known labels.")
        .def(py::init([](int warmup, const FitConfig& fit, int stride, DetectorConfig detector,
                         std::vector<double> stay, std::optional<std::vector<int>> labels) {
                 RealtimeConfig c;
                 c.warmup = warmup;
                 c.fit = fit;
                 c.stride = stride;
                 c.detector = detector;
                 c.stay = std::move(stay);
                 c.known_labels = std::move(labels);
                 return c;
             }),
             py::arg("warmup"), py::arg("fit"), py::arg("stride") = 1,
             py::arg("detector") = DetectorConfig{0, 0.8, 0.2, 0},
             py::arg("stay") = std::vector<double>{}, py::arg("known_labels") = py::none())
        .def_readwrite("warmup", &RealtimeConfig::warmup)
        .def_readwrite("stride", &RealtimeConfig::stride)
        .def_readwrite("detector", &RealtimeConfig::detector)
        .def_readwrite("fit", &RealtimeConfig::fit)
        .def_readwrite("stay", &RealtimeConfig::stay)
        .def_readwrite("known_labels", &RealtimeConfig::known_labels);

    py::class_<RealtimeResult>(m, "RealtimeResult",
                               "Realtime output: per-period filtered regime-2 probability "
                               "(NaN before warmup and on failed windows), detected "
                               "points, failed window indices.")
        .def(py::init<>())
        .def_readwrite("probs", &RealtimeResult::probs)
        .def_readwrite("points", &RealtimeResult::points)
        .def_readwrite("failed_windows", &RealtimeResult::failed_windows);

    m.def("realtime_detect", &realtime_detect, py::arg("panel"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>(),
          "Expanding-window estimation with filtered probabilities and the "
          "hysteresis rule applied in real time.");

    // ---- evaluation ----

    py::class_<RotationSet>(m, "RotationSet",
                            "Per-regime rotation matrices linking estimates to truth.")
        .def(py::init<>())
        .def_readwrite("w", &RotationSet::w)
        .def_readwrite("h", &RotationSet::h);

    py::class_<ClassificationReport>(m, "ClassificationReport",
                                     "Regime classification quality against true states.")
        .def(py::init<>())
        .def_readwrite("mean_abs_error", &ClassificationReport::mean_abs_error)
        .def_readwrite("sup_abs_error", &ClassificationReport::sup_abs_error)
        .def_readwrite("false_positive_spans", &ClassificationReport::false_positive_spans)
        .def_readwrite("per_t_labels", &ClassificationReport::per_t_labels)
        .def_readwrite("misclassified_spans", &ClassificationReport::misclassified_spans);

    py::class_<StandardizedSample>(m, "StandardizedSample",
                                   "Cross-replication standardized estimation errors.")
        .def(py::init<>())
        .def_readwrite("loading_errors", &StandardizedSample::loading_errors)
        .def_readwrite("factor_errors", &StandardizedSample::factor_errors);

    m.def("match_labels", &match_labels, py::arg("marginal"), py::arg("states"),
          "Permutation matching fitted regimes to true ones; perm[k] is the "
          "fitted column assigned to true regime k.");
    m.def("apply_permutation", &apply_permutation, py::arg("fit"), py::arg("perm"),
          "Reorder every regime-indexed field of a fit in place.");
    m.def("compute_rotations", &compute_rotations, py::arg("truth"), py::arg("fit"));
    m.def("r2_loading_space", &r2_loading_space, py::arg("truth"), py::arg("fit"), py::arg("j"),
          "Mean squared canonical-angle cosine between estimated and true "
          "loading spaces; invariant to invertible right-multiplication.");
    m.def(
        "r2_factors",
        [](const SimTruth& truth, const FitResult& fit, bool rotated,
           const std::optional<RotationSet>& rot) {
            return r2_factors(truth, fit, rotated, rot ? &*rot : nullptr);
        },
        py::arg("truth"), py::arg("fit"), py::arg("rotated") = false,
        py::arg("rot") = py::none(),
        "Uncentered R^2 of the estimated factors on the true (optionally "
        "regime-rotated) ones.");
    m.def("classification_report", &classification_report, py::arg("truth"), py::arg("marginal"),
          py::arg("enter") = 0.9, py::arg("exit") = 0.1);
    m.def("standardized_estimates", &standardized_estimates, py::arg("fits"), py::arg("truths"),
          "Standardized loading and factor errors across replications.");
    m.def("skewness", &skewness, py::arg("sample"));
    m.def("excess_kurtosis", &excess_kurtosis, py::arg("sample"));

    py::class_<Table1Cell>(m, "Table1Cell",
                           "One Monte Carlo cell: simulation settings, estimator flavor, "
                           "replication and restart counts.")
        .def(py::init([](SimConfig sim, bool smoothed, int reps, int trials, Sigma2Mode sigma2,
                         std::vector<double> stay) {
                 return Table1Cell{std::move(sim), smoothed, reps, trials, sigma2, std::move(stay)};
             }),
             py::arg("sim"), py::arg("smoothed") = true, py::arg("reps") = 5,
             py::arg("trials") = 5, py::arg("sigma2") = Sigma2Mode::Fixed(1.0),
             py::arg("stay") = std::vector<double>{0.95, 0.72})
        .def_readwrite("sim", &Table1Cell::sim)
        .def_readwrite("smoothed", &Table1Cell::smoothed)
        .def_readwrite("reps", &Table1Cell::reps)
        .def_readwrite("trials", &Table1Cell::trials)
        .def_readwrite("sigma2", &Table1Cell::sigma2)
        .def_readwrite("stay", &Table1Cell::stay);

    py::class_<Table1Row>(m, "Table1Row", "Cell averages over successful replications.")
        .def(py::init<>())
        .def_readwrite("cell", &Table1Row::cell)
        .def_readwrite("r2_l1", &Table1Row::r2_l1)
        .def_readwrite("r2_l2", &Table1Row::r2_l2)
        .def_readwrite("r2_f", &Table1Row::r2_f)
        .def_readwrite("r2_hf", &Table1Row::r2_hf)
        .def_readwrite("class_mean", &Table1Row::class_mean)
        .def_readwrite("class_sup", &Table1Row::class_sup)
        .def_readwrite("q11_err", &Table1Row::q11_err)
        .def_readwrite("q22_err", &Table1Row::q22_err)
        .def_readwrite("failures", &Table1Row::failures);

    m.def("run_cell", &run_cell, py::arg("cell"), py::arg("jobs") = 1,
          py::call_guard<py::gil_scoped_release>(),
          "Run one Monte Carlo cell; negative q errors mean not applicable.");
    m.def("table1_run", &table1_run, py::arg("grid"), py::arg("jobs") = 1,
          py::call_guard<py::gil_scoped_release>(), "Run a grid of cells.");

    // ---- data io ----

    py::class_<Table>(m, "Table",
                      "Raw CSV table: values (missing cells NaN), series names, date "
                      "index, and transform codes when the file carried a code row.")
        .def(py::init<>())
        .def_readwrite("x", &Table::x)
        .def_readwrite("names", &Table::names)
        .def_readwrite("dates", &Table::dates)
        .def_readwrite("codes", &Table::codes);

    py::class_<Standardizer>(m, "Standardizer",
                             "Balancing record: kept and dropped series, per-series "
                             "mean and standard deviation.")
        .def(py::init<>())
        .def_readwrite("kept", &Standardizer::kept)
        .def_readwrite("dropped", &Standardizer::dropped)
        .def_readwrite("mean", &Standardizer::mean)
        .def_readwrite("sd", &Standardizer::sd);

    m.def("load_table", py::overload_cast<const std::string&>(&load_table), py::arg("path"),
          "Parse a CSV file into a Table.");
    m.def("load_panel", &load_panel, py::arg("path"),
          "Strict loader for model input: balanced numeric panel required.");
    m.def("load_labels", &load_labels, py::arg("path"), "One integer label per line.");
    m.def("load_transform_codes", &load_transform_codes, py::arg("path"), py::arg("names"),
          "Sidecar transform codes, CSV rows 'series,code'.");
    m.def(
        "apply_transforms",
        [](Table& table, const std::vector<int>& codes) {
            std::vector<std::string> warnings;
            apply_transforms(table, codes, &warnings);
            return warnings;
        },
        py::arg("table"), py::arg("codes"),
        "Apply FRED-MD transformation codes in place; returns warnings.");
    m.def(
        "balance_and_standardize",
        [](const Table& table, int first_row, int last_row) {
            Standardizer info;
            std::vector<std::string> warnings;
            Panel p = balance_and_standardize(table, first_row, last_row, &info, &warnings);
            return py::make_tuple(std::move(p), std::move(info), std::move(warnings));
        },
        py::arg("table"), py::arg("first_row") = -1, py::arg("last_row") = -1,
        "Trim, drop incomplete or constant series, demean and scale; returns "
        "(panel, standardizer, warnings).");
    m.def("write_panel_csv", &write_panel_csv, py::arg("path"), py::arg("panel"),
          "17-significant-digit CSV, round-trip exact.");
    m.def("write_matrix_csv", &write_matrix_csv, py::arg("path"), py::arg("m"),
          py::arg("colnames"), py::arg("rownames") = std::vector<std::string>{},
          py::arg("corner") = std::string{});
}
