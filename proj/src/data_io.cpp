#include "rfm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace rfm {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\"");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\"");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& s, double* out) {
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") {
        *out = kNaN;
        return true;
    }
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    *out = v;
    return true;
}

bool is_int_code(const std::string& s, int* code) {
    double v;
    if (!parse_double(s, &v) || std::isnan(v)) return false;
    int c = static_cast<int>(v);
    if (c != v || c < 1 || c > 7) return false;
    *code = c;
    return true;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    return in;
}

} // namespace

Table load_table(std::istream& in, const std::string& origin) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        rows.push_back(split_csv(line));
        if (rows.back().size() != rows.front().size())
            throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(rows.front().size()) + " fields, got " +
                               std::to_string(rows.back().size()));
    }
    if (rows.size() < 2) throw InvalidInput(origin + ": need a header row and data");
    const std::size_t width = rows.front().size();

    // Column 0 is a date index when any of its data cells fails to parse as a
    // number; otherwise every column is a series.
    bool has_dates = false;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        double v;
        if (!parse_double(rows[r][0], &v)) {
            has_dates = true;
            break;
        }
    }
    const std::size_t first_col = has_dates ? 1 : 0;
    if (width == first_col) throw InvalidInput(origin + ": no data columns");

    Table t;
    for (std::size_t c = first_col; c < width; ++c) t.names.push_back(rows[0][c]);

    // FRED-MD style code row: the first data row carries integers 1..7 in
    // every series cell (its date cell, if any, is ignored).
    std::size_t first_data = 1;
    {
        std::vector<int> codes;
        bool all = rows.size() > 2;
        for (std::size_t c = first_col; all && c < width; ++c) {
            int code;
            if (is_int_code(rows[1][c], &code))
                codes.push_back(code);
            else
                all = false;
        }
        if (all) {
            t.codes = std::move(codes);
            first_data = 2;
        }
    }

    const std::size_t nrow = rows.size() - first_data;
    t.x.resize(static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(width - first_col));
    for (std::size_t r = 0; r < nrow; ++r) {
        const auto& row = rows[r + first_data];
        if (has_dates) t.dates.push_back(row[0]);
        for (std::size_t c = first_col; c < width; ++c) {
            double v;
            if (!parse_double(row[c], &v))
                throw InvalidInput(origin + ": unreadable number '" + row[c] + "' in row " +
                                   std::to_string(r + first_data + 1));
            t.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - first_col)) = v;
        }
    }
    return t;
}

Table load_table(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    return load_table(in, path);
}

std::vector<int> load_transform_codes(const std::string& path,
                                      const std::vector<std::string>& names) {
    std::ifstream in = open_or_throw(path);
    std::vector<std::pair<std::string, int>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != 2)
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": expected series,code");
        int code;
        if (!is_int_code(fields[1], &code)) {
            if (lineno == 1) continue;  // header row
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": code must be 1..7");
        }
        entries.emplace_back(fields[0], code);
    }
    std::vector<int> codes;
    codes.reserve(names.size());
    for (const std::string& name : names) {
        auto it = std::find_if(entries.begin(), entries.end(),
                               [&](const auto& e) { return e.first == name; });
        if (it == entries.end()) throw InvalidInput(path + ": no transform code for " + name);
        codes.push_back(it->second);
    }
    return codes;
}

std::vector<int> load_labels(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::vector<int> raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty()) continue;
        // Allow a one-column CSV with a header line.
        if (lineno == 1 && !s.empty() && !std::isdigit(static_cast<unsigned char>(s[0])) &&
            s[0] != '-')
            continue;
        char* end = nullptr;
        long v = std::strtol(s.c_str(), &end, 10);
        if (end != s.c_str() + s.size())
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": labels must be integers");
        raw.push_back(static_cast<int>(v));
    }
    if (raw.empty()) throw InvalidInput(path + ": no labels");
    int lo = *std::min_element(raw.begin(), raw.end());
    int hi = *std::max_element(raw.begin(), raw.end());
    if (lo < 0 || (lo == 0 && hi > 1))
        throw InvalidInput(path + ": labels must be 0-based {0,1,...} or 1-based {1,2,...}");
    if (lo >= 1)
        for (int& v : raw) v -= 1;  // 1-based on disk
    return raw;
}

void apply_transforms(Table& table, const std::vector<int>& codes,
                      std::vector<std::string>* warnings) {
    const Eigen::Index t = table.x.rows();
    const Eigen::Index n = table.x.cols();
    if (static_cast<Eigen::Index>(codes.size()) != n)
        throw InvalidInput("apply_transforms: one code per series required");
    for (Eigen::Index c = 0; c < n; ++c) {
        int code = codes[static_cast<std::size_t>(c)];
        if (code < 1 || code > 7) throw InvalidInput("apply_transforms: code must be 1..7");
        Vector x = table.x.col(c);
        if (code == 4 || code == 5 || code == 6) {
            int bad = 0;
            for (Eigen::Index i = 0; i < t; ++i) {
                if (std::isnan(x(i))) continue;
                if (x(i) <= 0.0) {
                    x(i) = kNaN;
                    ++bad;
                } else {
                    x(i) = std::log(x(i));
                }
            }
            if (bad > 0 && warnings)
                warnings->push_back(table.names[static_cast<std::size_t>(c)] + ": " +
                                    std::to_string(bad) + " non-positive values set to missing");
        }
        auto diff = [t](const Vector& v) {
            Vector d = Vector::Constant(t, kNaN);
            for (Eigen::Index i = 1; i < t; ++i) d(i) = v(i) - v(i - 1);
            return d;
        };
        switch (code) {
        case 1:
        case 4:
            break;
        case 2:
        case 5:
            x = diff(x);
            break;
        case 3:
        case 6:
            x = diff(diff(x));
            break;
        case 7: {
            Vector g = Vector::Constant(t, kNaN);
            for (Eigen::Index i = 1; i < t; ++i)
                g(i) = x(i - 1) != 0.0 ? x(i) / x(i - 1) - 1.0 : kNaN;
            x = diff(g);
            break;
        }
        default:
            break;
        }
        table.x.col(c) = x;
    }
}

Panel balance_and_standardize(const Table& table, int first_row, int last_row,
                              Standardizer* info, std::vector<std::string>* warnings) {
    const Eigen::Index t = table.x.rows();
    if (first_row < 0) first_row = 0;
    if (last_row < 0) last_row = static_cast<int>(t) - 1;
    if (first_row > last_row || last_row >= t)
        throw InvalidInput("balance: bad row range");
    const Eigen::Index span = last_row - first_row + 1;
    if (span < 2) throw InvalidInput("balance: need at least 2 rows");

    Standardizer local;
    Standardizer& st = info ? *info : local;
    st = {};
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < table.x.cols(); ++c) {
        const auto col = table.x.col(c).segment(first_row, span);
        const std::string& name = table.names[static_cast<std::size_t>(c)];
        if (!col.allFinite()) {
            st.dropped.push_back(name);
            if (warnings) warnings->push_back(name + ": missing values in range, dropped");
            continue;
        }
        double mean = col.mean();
        double sd = std::sqrt((col.array() - mean).square().sum() / (span - 1));
        if (!(sd > 0.0)) {
            st.dropped.push_back(name);
            if (warnings) warnings->push_back(name + ": zero variance, dropped");
            continue;
        }
        keep.push_back(c);
        st.kept.push_back(name);
        st.mean.push_back(mean);
        st.sd.push_back(sd);
    }
    if (keep.empty()) throw InvalidInput("balance: no usable series");

    Panel p;
    p.x.resize(span, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
        p.x.col(static_cast<Eigen::Index>(k)) =
            (table.x.col(keep[k]).segment(first_row, span).array() - st.mean[k]) / st.sd[k];
    p.names = st.kept;
    if (!table.dates.empty())
        p.dates.assign(table.dates.begin() + first_row, table.dates.begin() + last_row + 1);
    return p;
}

Panel load_panel(const std::string& path) {
    Table t = load_table(path);
    if (!t.x.allFinite())
        throw InvalidInput(path + ": panel has missing cells; run the balance step first");
    Panel p;
    p.x = std::move(t.x);
    p.names = std::move(t.names);
    p.dates = std::move(t.dates);
    return p;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    return out;
}

} // namespace

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& colnames,
                      const std::vector<std::string>& rownames, const std::string& corner) {
    if (static_cast<Eigen::Index>(colnames.size()) != m.cols())
        throw InvalidInput("write_matrix_csv: header width mismatch");
    if (!rownames.empty() && static_cast<Eigen::Index>(rownames.size()) != m.rows())
        throw InvalidInput("write_matrix_csv: row name count mismatch");
    std::ofstream out = open_out(path);
    if (!rownames.empty()) out << corner << ',';
    for (std::size_t c = 0; c < colnames.size(); ++c)
        out << colnames[c] << (c + 1 < colnames.size() ? "," : "");
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (!rownames.empty()) out << rownames[static_cast<std::size_t>(r)] << ',';
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out << format_double(m(r, c)) << (c + 1 < m.cols() ? "," : "");
        out << '\n';
    }
    if (!out) throw InvalidInput("write failed: " + path);
}

void write_panel_csv(const std::string& path, const Panel& panel) {
    write_matrix_csv(path, panel.x, panel.names, panel.dates, "date");
}

} // namespace rfm
