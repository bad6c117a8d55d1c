#pragma once

#include "rfm/data_io.hpp"
#include "rfm/types.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cli {

/// Options shared by every subcommand. seed falls back to REGIME_FACTOR_SEED.
struct GlobalOpts {
    std::uint64_t seed = 0;
    int jobs = 0;  // 0 = all hardware threads
};

void register_simulate(CLI::App& app, GlobalOpts& g);
void register_fit(CLI::App& app, GlobalOpts& g);
void register_detect(CLI::App& app, GlobalOpts& g);
void register_eval(CLI::App& app, GlobalOpts& g);
void register_table1(CLI::App& app, GlobalOpts& g);
void register_plotdata(CLI::App& app, GlobalOpts& g);

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw rfm::InvalidInput("cannot create directory " + dir + ": " + ec.message());
    return p;
}

/// Column from a CSV by name; "" means the sole data column, or the column
/// named regime_2 when present (the fit writer's convention).
rfm::Vector load_prob_column(const std::string& path, const std::string& column);

/// One-column label CSV with a "state" header, 1-based values on disk.
void write_states_csv(const std::string& path, const std::vector<int>& states,
                      const std::vector<std::string>& dates = {});

} // namespace cli
