#pragma once

// Column-per-variable CSV: header row of names, one row per time step,
// empty cells read as NaN.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "infoflow/core.hpp"
#include "infoflow/error.hpp"

namespace infoflow {

struct CsvTable {
    std::vector<std::string> names;
    Matrix values;  // d×N, row = column of the file
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view cell, double& out) {
    cell = trim(cell);
    if (cell.empty()) {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace detail

[[nodiscard]] inline CsvTable parse_csv_text(std::string_view text) {
    std::vector<std::string_view> lines = detail::split(text, '\n');
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    }
    while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw Error(ErrorCode::EmptyFile, "no header row");

    CsvTable table;
    for (auto cell : detail::split(lines.front(), ',')) {
        cell = detail::trim(cell);
        if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
        table.names.emplace_back(cell);
    }
    const std::size_t d = table.names.size();
    const std::size_t n = lines.size() - 1;
    table.values.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const auto cells = detail::split(lines[r + 1], ',');
        const std::size_t line_no = r + 2;
        if (cells.size() != d) {
            throw Error(ErrorCode::Malformed, "line " + std::to_string(line_no) + ": expected " + std::to_string(d) +
                                                  " fields, got " + std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < d; ++c) {
            double v = 0.0;
            if (!detail::parse_double(cells[c], v)) {
                throw Error(ErrorCode::Malformed, "line " + std::to_string(line_no) + ": non-numeric cell '" +
                                                      std::string(detail::trim(cells[c])) + "'");
            }
            table.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
        }
    }
    return table;
}

[[nodiscard]] inline CsvTable parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv_text(buf.str());
}

/// Writes values with 17 significant digits so parse_csv reads them back exactly.
[[nodiscard]] inline std::string write_csv(const std::vector<std::string>& names, const Matrix& values) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    out += '\n';
    char buf[40];
    for (Eigen::Index n = 0; n < values.cols(); ++n) {
        for (Eigen::Index r = 0; r < values.rows(); ++r) {
            if (r) out += ',';
            const double v = values(r, n);
            if (!std::isnan(v)) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace infoflow
