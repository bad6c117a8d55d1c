#include "common.hpp"

#include <cstdio>
#include <exception>

int main(int argc, char** argv) {
    CLI::App app{"Regime-switching factor models: simulation, EM estimation, "
                 "turning-point detection"};
    app.require_subcommand(1);
    app.set_config("--config")->description("key=value file, [section] per subcommand");

    cli::GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed for every derived stream")
        ->envname("REGIME_FACTOR_SEED")
        ->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads, 0 = all cores; results do not depend on it")
        ->capture_default_str();

    cli::register_simulate(app, g);
    cli::register_fit(app, g);
    cli::register_detect(app, g);
    cli::register_eval(app, g);
    cli::register_table1(app, g);
    cli::register_plotdata(app, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const rfm::InvalidInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const rfm::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const rfm::ConvergenceError& e) {
        std::fprintf(stderr, "did not converge: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
