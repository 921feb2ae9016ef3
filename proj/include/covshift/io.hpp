#pragma once

#include "covshift/numerics.hpp"
#include "covshift/types.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace covshift {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Numeric CSV without header: one point per row, coordinates comma-separated.
/// When with_labels is set the last column is the label.
inline SampleSet read_points_csv(const std::string& path, bool with_labels = false) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<double> row;
        for (const std::string& cell : split(t, ',')) row.push_back(parse_double(cell));
        if (width == 0) width = row.size();
        if (row.size() != width) {
            throw data_error("'" + path + "': ragged row with " + std::to_string(row.size()) +
                             " fields, expected " + std::to_string(width));
        }
        rows.push_back(std::move(row));
    }
    const std::size_t label_cols = with_labels ? 1 : 0;
    if (with_labels && width < 2) {
        throw data_error("'" + path + "': labeled data needs at least two columns");
    }
    const Index n = static_cast<Index>(rows.size());
    const Index d = static_cast<Index>(width - label_cols);
    SampleSet s;
    s.points.resize(n, d);
    if (with_labels) s.labels = Vector(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) s.points(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (with_labels) (*s.labels)(i) = rows[static_cast<std::size_t>(i)].back();
    }
    validate_sample_set(s, path.c_str());
    return s;
}

/// Flat key = value text; '#' starts a comment, later keys override earlier ones.
inline std::map<std::string, std::string> read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw config_error("'" + path + "' line " + std::to_string(lineno) +
                               ": expected key = value");
        }
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

inline std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& cell : split(text, ',')) {
        const std::string t = trim(cell);
        if (!t.empty()) out.push_back(parse_double(t));
    }
    return out;
}

struct RangeSpec {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

/// "a:b:k" ranges used for evaluation grids and lambda grids.
inline RangeSpec parse_range(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw config_error("range '" + text + "': expected a:b:k");
    RangeSpec r;
    try {
        r.lo = parse_double(trim(parts[0]));
        r.hi = parse_double(trim(parts[1]));
        r.count = static_cast<int>(parse_double(trim(parts[2])));
    } catch (const data_error&) {
        throw config_error("range '" + text + "': not numeric");
    }
    if (r.count < 1) throw config_error("range '" + text + "': k must be >= 1");
    return r;
}

inline SampleSet grid_sample(const RangeSpec& r) {
    const auto xs = linspace(r.lo, r.hi, r.count);
    SampleSet s;
    s.points.resize(static_cast<Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) s.points(static_cast<Index>(i), 0) = xs[i];
    return s;
}

}  // namespace covshift
