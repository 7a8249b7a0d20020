#pragma once

#include "msdcv/common.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace msdcv {

// Minimal CSV support for the project's own formats: comma separated, no
// quoting or escapes (identifiers are plain tokens), decimal point, UTF-8.

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "csv: cannot open '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline double parse_double(const std::string& s, const std::string& ctx) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, value);
    require(res.ec == std::errc() && res.ptr == last,
            ctx + ": not a number: '" + s + "'");
    return value;
}

inline long parse_long(const std::string& s, const std::string& ctx) {
    long value = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, value);
    require(res.ec == std::errc() && res.ptr == last,
            ctx + ": not an integer: '" + s + "'");
    return value;
}

/// Shortest decimal form that round-trips the double exactly.
inline std::string format_double(double x) {
    if (x == std::floor(x) && std::abs(x) < 1e15) {
        char tmp[32];
        std::snprintf(tmp, sizeof(tmp), "%.0f", x);
        return tmp;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    double back = 0.0;
    // try shorter forms first
    for (int prec = 1; prec <= 16; ++prec) {
        char tmp[32];
        std::snprintf(tmp, sizeof(tmp), "%.*g", prec, x);
        std::sscanf(tmp, "%lf", &back);
        if (back == x) return tmp;
    }
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        require(out_.good(), "csv: cannot write '" + path + "'");
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream& stream() { return out_; }

private:
    std::ofstream out_;
};

} // namespace msdcv
