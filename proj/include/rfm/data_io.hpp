#pragma once

#include "rfm/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rfm {

/// Raw CSV table. Missing cells are NaN. A leading non-numeric column is
/// treated as the date index; a second header row whose data cells are all
/// integers 1..7 (FRED-MD layout) is lifted out as transform codes.
struct Table {
    Matrix x;
    std::vector<std::string> names;
    std::vector<std::string> dates;
    std::vector<int> codes;   // empty if the file had no code row
};

Table load_table(const std::string& path);
Table load_table(std::istream& in, const std::string& origin);

/// Sidecar transform codes, CSV rows "series,code". Order follows the table.
std::vector<int> load_transform_codes(const std::string& path, const std::vector<std::string>& names);

/// One integer label per line (simulate pattern-1 override, truth files).
std::vector<int> load_labels(const std::string& path);

/// FRED-MD transformation codes, applied in place:
/// 1 level, 2 diff, 3 double diff, 4 log, 5 dlog, 6 double dlog,
/// 7 diff of gross rate minus one. Leading undefined rows become NaN;
/// logs of non-positive cells become NaN and are counted in warnings.
void apply_transforms(Table& table, const std::vector<int>& codes,
                      std::vector<std::string>* warnings = nullptr);

struct Standardizer {
    std::vector<std::string> kept;
    std::vector<std::string> dropped;     // missing cells or zero variance
    std::vector<double> mean;
    std::vector<double> sd;               // T-1 denominator
};

/// Keep rows [first_row, last_row] (negative = full span), drop series with
/// any missing cell in range or zero variance, demean and scale the rest.
Panel balance_and_standardize(const Table& table, int first_row = -1, int last_row = -1,
                              Standardizer* info = nullptr,
                              std::vector<std::string>* warnings = nullptr);

/// Strict loader for model input: balanced numeric panel required.
Panel load_panel(const std::string& path);

/// 17-significant-digit CSV writers (round-trip exact for doubles).
void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& colnames,
                      const std::vector<std::string>& rownames = {},
                      const std::string& corner = "");
void write_panel_csv(const std::string& path, const Panel& panel);

std::string format_double(double v);

} // namespace rfm
