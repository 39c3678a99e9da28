// csv.hpp - strict CSV reading/writing helpers.
//
// Dialect: comma separated, '.' decimal point, mandatory header row, UTF-8,
// no quoting.  Numbers are written with std::to_chars (shortest round-trip
// form) so emitted files are byte-for-byte reproducible and re-read exactly.
#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"

namespace odkit {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // data rows, header excluded
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

}  // namespace detail

// Reads a whole CSV file.  Every data row must have exactly as many cells as
// the header.  Row numbers in error messages are 1-based data rows (the
// header is row 0).
inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file (missing header): " + path);
    table.header = detail::split_line(line);
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
        auto cells = detail::split_line(line);
        if (cells.size() != table.header.size())
            throw DataError(path + ": row " + std::to_string(row_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.rows.empty()) throw DataError("CSV file has no data rows: " + path);
    return table;
}

// Reads just the header row - cheap column introspection for large files.
inline std::vector<std::string> csv_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file (missing header): " + path);
    return detail::split_line(line);
}

// Parses one cell as a finite double.  NaN/inf spellings parse under
// std::from_chars, so finiteness is checked explicitly and rejected.
inline double parse_double_cell(const std::string& cell, std::size_t row_no,
                                const std::string& column) {
    auto fail = [&](const char* what) {
        throw DataError(std::string(what) + " at row " + std::to_string(row_no) + ", column '" +
                        column + "': '" + cell + "'");
    };
    if (cell.empty()) fail("empty cell");
    double value = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) fail("unparseable numeric cell");
    if (!std::isfinite(value)) fail("non-finite value");
    return value;
}

// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace odkit
