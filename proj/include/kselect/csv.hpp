#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <string>
#include <system_error>
#include <vector>

#include "kselect/errors.hpp"
#include "kselect/matrix.hpp"

namespace kselect {

// RFC 4180 cell grid: quoted fields, embedded separators/newlines, doubled
// quotes, and both LF and CRLF records.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t line = 1;

    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    cell.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (cell_started && !cell.empty())
                    throw ParseError(line, row.size() + 1, "quote inside unquoted field");
                in_quotes = true;
                cell_started = true;
                break;
            case ',':
                end_cell();
                break;
            case '\r':
                if (in.peek() == '\n') in.get(c);
                [[fallthrough]];
            case '\n':
                end_row();
                ++line;
                break;
            default:
                cell.push_back(c);
                cell_started = true;
        }
    }
    if (in_quotes) throw ParseError(line, row.size() + 1, "unterminated quoted field");
    if (cell_started || !cell.empty() || !row.empty()) end_row();
    return rows;
}

inline bool parse_double(const std::string& text, double& out) {
    std::size_t begin = text.find_first_not_of(" \t");
    if (begin == std::string::npos) return false;
    const std::size_t end = text.find_last_not_of(" \t") + 1;
    const char* first = text.data() + begin;
    const char* last = text.data() + end;
    const auto result = std::from_chars(first, last, out);
    return result.ec == std::errc() && result.ptr == last;
}

// Shortest round-trip decimal representation.
inline std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

struct NumericCsv {
    std::vector<std::string> header;  // empty when the file has no header row
    Matrix values;
};

// Reads a numeric CSV. A first row with any non-numeric cell is taken as the
// header. Non-numeric cells elsewhere raise ParseError with 1-based row and
// column positions in the file.
inline NumericCsv read_numeric_csv(std::istream& in) {
    const auto rows = parse_csv(in);
    if (rows.empty()) throw ParseError(1, 1, "empty input");
    NumericCsv out;
    std::size_t first_data_row = 0;
    double probe;
    for (const std::string& cell : rows[0])
        if (!parse_double(cell, probe)) {
            out.header = rows[0];
            first_data_row = 1;
            break;
        }
    if (first_data_row == rows.size()) throw ParseError(1, 1, "no data rows");
    const std::size_t cols = rows[first_data_row].size();
    Matrix values(rows.size() - first_data_row, cols);
    for (std::size_t r = first_data_row; r < rows.size(); ++r) {
        if (rows[r].size() != cols)
            throw ParseError(r + 1, rows[r].size(),
                             "expected " + std::to_string(cols) + " fields, found " +
                                 std::to_string(rows[r].size()));
        for (std::size_t c = 0; c < cols; ++c) {
            if (!parse_double(rows[r][c], values(r - first_data_row, c)))
                throw ParseError(r + 1, c + 1, "not a number: '" + rows[r][c] + "'");
        }
    }
    out.values = std::move(values);
    return out;
}

}  // namespace kselect
