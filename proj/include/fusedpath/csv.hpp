#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fusedpath/error.hpp"

namespace fusedpath {

/// A CSV file held as strings: one header row plus data rows of equal width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or -1.
    long column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<long>(i);
        return -1;
    }
};

namespace detail {

inline bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

} // namespace detail

/// Comma-delimited, RFC 4180 quoting, header row required. Blank lines are skipped.
inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::vector<std::string> fields;
    if (!detail::read_record(in, fields)) throw DataError("csv: missing header row");
    if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
    table.header = fields;
    std::size_t line = 1;
    while (detail::read_record(in, fields)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != table.header.size())
            throw DataError("csv: line " + std::to_string(line) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        table.rows.push_back(fields);
    }
    return table;
}

/// Full round-trip precision (17 significant digits).
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Writes one CSV row; fields are escaped.
inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

} // namespace fusedpath
