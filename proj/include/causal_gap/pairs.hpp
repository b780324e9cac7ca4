#pragma once

#include "causal_gap/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace causal_gap {

/// One pairmeta.txt record (1-based, inclusive column ranges).
struct PairMeta {
    int id = 0;
    int cause_first = 1, cause_last = 1;
    int effect_first = 2, effect_last = 2;
    double weight = 1.0;

    int cause_col() const { return cause_first; }
    int effect_col() const { return effect_first; }
};

struct CauseEffectPair {
    int id = 0;
    std::vector<double> x;  // cause
    std::vector<double> y;  // effect
    std::vector<std::vector<double>> raw_columns;
    PairMeta meta;
    std::size_t rows_in = 0;
    std::size_t rows_dropped = 0;
    std::size_t rows_used() const { return x.size(); }
};

enum class DayWindow { none, summer_window, first_183 };

inline const char* to_string(DayWindow w) {
    switch (w) {
        case DayWindow::none: return "none";
        case DayWindow::summer_window: return "summer";
        case DayWindow::first_183: return "first183";
    }
    return "?";
}

inline DayWindow parse_day_window(std::string_view s) {
    if (s == "none") return DayWindow::none;
    if (s == "summer" || s == "summer_window") return DayWindow::summer_window;
    if (s == "first183" || s == "first_183") return DayWindow::first_183;
    throw ValidationError("unknown restriction '" + std::string(s) + "' (expected none, summer or first183)");
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

// std::from_chars is locale-independent; accepts nan/inf spellings.
inline bool parse_double(std::string_view tok, double& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

inline bool parse_int(std::string_view tok, int& out) {
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

}  // namespace detail

/// "0042 1 1 2 2 1.0" -> id 42, cause column 1, effect column 2, weight 1.
inline PairMeta parse_meta(std::string_view line) {
    const auto tok = detail::split_ws(line);
    if (tok.size() != 6) {
        throw ParseError("pairmeta: expected 6 fields, got " + std::to_string(tok.size()) + " in '" +
                         std::string(line) + "'");
    }
    PairMeta m;
    int* ints[] = {&m.id, &m.cause_first, &m.cause_last, &m.effect_first, &m.effect_last};
    for (std::size_t k = 0; k < 5; ++k) {
        if (!detail::parse_int(tok[k], *ints[k])) {
            throw ParseError("pairmeta: field " + std::to_string(k + 1) + " is not an integer: '" +
                             std::string(tok[k]) + "'");
        }
    }
    if (!detail::parse_double(tok[5], m.weight) || !std::isfinite(m.weight)) {
        throw ParseError("pairmeta: weight is not a number: '" + std::string(tok[5]) + "'");
    }
    if (m.id < 0 || m.cause_first < 1 || m.effect_first < 1 || m.cause_last < m.cause_first ||
        m.effect_last < m.effect_first) {
        throw ParseError("pairmeta: invalid column ranges in '" + std::string(line) + "'");
    }
    if (m.cause_last != m.cause_first || m.effect_last != m.effect_first) {
        throw ValidationError("pair " + std::to_string(m.id) +
                              ": multi-column cause or effect is not supported (bivariate pairs only)");
    }
    return m;
}

/// Every record of a pairmeta file, skipping blank lines.
inline std::vector<PairMeta> read_meta_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<PairMeta> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::split_ws(line).empty()) continue;
        try {
            out.push_back(parse_meta(line));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// The record for `id`. Multi-column records for other ids do not matter.
inline PairMeta find_meta(const std::filesystem::path& path, int id) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto tok = detail::split_ws(line);
        int rid = -1;
        if (!tok.empty() && detail::parse_int(tok[0], rid) && rid == id) return parse_meta(line);
    }
    throw IoError("pair " + std::to_string(id) + " not listed in " + path.string());
}

/// Numeric matrix from whitespace-separated text.
inline std::vector<std::vector<double>> parse_columns(std::istream& in, const std::string& name) {
    std::vector<std::vector<double>> cols;
    std::string line;
    std::size_t lineno = 0, width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (width == 0) {
            width = tok.size();
            cols.assign(width, {});
        } else if (tok.size() != width) {
            throw ParseError(name + ":" + std::to_string(lineno) + ": ragged row (" + std::to_string(tok.size()) +
                             " fields, expected " + std::to_string(width) + ")");
        }
        for (std::size_t k = 0; k < width; ++k) {
            double v;
            if (!detail::parse_double(tok[k], v)) {
                throw ParseError(name + ":" + std::to_string(lineno) + ": not a number: '" + std::string(tok[k]) +
                                 "'");
            }
            cols[k].push_back(v);
        }
    }
    if (width == 0) throw ParseError(name + ": empty file");
    return cols;
}

inline CauseEffectPair make_pair_from_columns(std::vector<std::vector<double>> cols, const PairMeta& meta) {
    const auto ncol = static_cast<int>(cols.size());
    if (meta.cause_col() > ncol || meta.effect_col() > ncol) {
        throw ValidationError("pair " + std::to_string(meta.id) + ": metadata names column " +
                              std::to_string(std::max(meta.cause_col(), meta.effect_col())) + " but the file has " +
                              std::to_string(ncol));
    }
    CauseEffectPair p;
    p.id = meta.id;
    p.meta = meta;
    const auto& cx = cols[static_cast<std::size_t>(meta.cause_col() - 1)];
    const auto& cy = cols[static_cast<std::size_t>(meta.effect_col() - 1)];
    p.rows_in = cx.size();
    for (std::size_t i = 0; i < cx.size(); ++i) {
        if (std::isfinite(cx[i]) && std::isfinite(cy[i])) {
            p.x.push_back(cx[i]);
            p.y.push_back(cy[i]);
        } else {
            ++p.rows_dropped;
        }
    }
    p.raw_columns = std::move(cols);
    return p;
}

/// Parses a pair file; rows with a non-finite cause or effect are dropped
/// and counted.
inline CauseEffectPair load_pair(const std::filesystem::path& path, const PairMeta& meta) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return make_pair_from_columns(parse_columns(in, path.string()), meta);
}

inline std::string pair_file_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair%04d.txt", id);
    return buf;
}

/// pairNNNN.txt from `dir`, with its record from dir/pairmeta.txt.
inline CauseEffectPair load_pair_from_dir(const std::filesystem::path& dir, int id) {
    const PairMeta meta = find_meta(dir / "pairmeta.txt", id);
    return load_pair(dir / pair_file_name(id), meta);
}

/// Keeps rows whose cause (a 1-based day of year) lies in [91, 273]
/// (summer) or in [1, 183] (first183).
inline CauseEffectPair restrict_days(const CauseEffectPair& pair, DayWindow mode) {
    if (mode == DayWindow::none) return pair;
    const double lo = mode == DayWindow::summer_window ? 91.0 : -std::numeric_limits<double>::infinity();
    const double hi = mode == DayWindow::summer_window ? 273.0 : 183.0;
    CauseEffectPair out = pair;
    out.x.clear();
    out.y.clear();
    for (std::size_t i = 0; i < pair.x.size(); ++i) {
        if (pair.x[i] >= lo && pair.x[i] <= hi) {
            out.x.push_back(pair.x[i]);
            out.y.push_back(pair.y[i]);
        }
    }
    if (out.x.empty()) {
        throw ValidationError("restrict_days(" + std::string(to_string(mode)) + "): no rows left for pair " +
                              std::to_string(pair.id));
    }
    return out;
}

/// Two-column text with 17 significant digits.
inline void write_pair(std::ostream& out, const CauseEffectPair& pair) {
    char buf[64];
    for (std::size_t i = 0; i < pair.x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", pair.x[i], pair.y[i]);
        out << buf;
    }
}

inline void write_pair(const std::filesystem::path& path, const CauseEffectPair& pair) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_pair(out, pair);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace causal_gap
