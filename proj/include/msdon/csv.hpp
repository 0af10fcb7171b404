#pragma once

// Minimal numeric CSV: header row, '.' decimal point, shortest round-trip
// number formatting, newline-terminated rows.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "msdon/error.hpp"

namespace msdon::csv {

inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    if (s == "nan") {
        out = NAN;
        return true;
    }
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
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

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(std::size_t c) const
    {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.at(c));
        return out;
    }
};

// Reads a numeric table. A first row that does not parse as numbers is kept
// as the header; any later unparsable cell is an error.
inline Table read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    Table t;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        std::vector<double> row;
        bool numeric = true;
        for (auto c : cells) {
            double v = 0.0;
            if (!parse_double(c, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (t.rows.empty() && t.header.empty()) {
                for (auto c : cells) t.header.emplace_back(c);
                continue;
            }
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": unparsable numeric row");
        }
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": inconsistent column count");
        t.rows.push_back(std::move(row));
    }
    return t;
}

class Writer {
public:
    Writer(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path)
    {
        if (!out_) throw Error("cannot write " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& values)
    {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
        out_ << '\n';
    }

    ~Writer() = default;

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

// Writes equal-length columns.
inline void write_columns(const std::filesystem::path& path, const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& columns)
{
    std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n) throw InvalidArgument("csv::write_columns: ragged columns for " + path.string());
    Writer w(path, header);
    std::vector<double> row(columns.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) row[c] = columns[c][r];
        w.row(row);
    }
}

} // namespace msdon::csv
