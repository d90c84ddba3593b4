#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpw/errors.hpp"
#include "cpw/rng.hpp"
#include "cpw/series.hpp"

namespace cpw::ingest {

/// A waveform profile loaded from disk.
struct Dataset {
    WaveformSeries series;
    std::string source_path;
    std::string units;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline bool trim_empty(const std::string& line) {
    for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    const char* s = cell.c_str();
    char* endp = nullptr;
    const double v = std::strtod(s, &endp);
    while (endp && *endp == ' ') ++endp;
    if (cell.empty() || !endp || *endp != '\0' || !std::isfinite(v)) {
        throw ParseError("non-numeric cell '" + cell + "' in column '" + col + "' at row " +
                             std::to_string(row),
                         row, col);
    }
    return v;
}

} // namespace detail

/// Reads a two-column waveform profile from a headered CSV. The sample rate
/// is inferred as the reciprocal of the median timestamp spacing; spacing
/// jitter beyond one part in 1e6 is rejected.
inline Dataset read_waveform_csv(const std::string& path, const std::string& time_col,
                                 const std::string& value_col) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path, 0, "");
    const auto header = detail::split_csv_line(line);
    std::ptrdiff_t t_idx = -1, v_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = header[i];
        name.erase(std::remove(name.begin(), name.end(), ' '), name.end());
        if (name == time_col) t_idx = static_cast<std::ptrdiff_t>(i);
        if (name == value_col) v_idx = static_cast<std::ptrdiff_t>(i);
    }
    if (t_idx < 0) throw ParseError("missing column '" + time_col + "'", 1, time_col);
    if (v_idx < 0) throw ParseError("missing column '" + value_col + "'", 1, value_col);

    std::vector<double> times, values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim_empty(line)) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() <= static_cast<std::size_t>(std::max(t_idx, v_idx))) {
            throw ParseError("short row at " + std::to_string(row), row, "");
        }
        times.push_back(detail::parse_cell(cells[static_cast<std::size_t>(t_idx)], row, time_col));
        values.push_back(
            detail::parse_cell(cells[static_cast<std::size_t>(v_idx)], row, value_col));
    }
    if (times.size() < 2) {
        throw ParseError("need at least 2 data rows, got " + std::to_string(times.size()),
                         row, time_col);
    }

    std::vector<double> dts(times.size() - 1);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        dts[i] = times[i + 1] - times[i];
        if (!(dts[i] > 0.0)) {
            throw ParseError("timestamps not strictly increasing at row " + std::to_string(i + 3),
                             i + 3, time_col);
        }
    }
    std::vector<double> sorted = dts;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double med = sorted[sorted.size() / 2];
    for (std::size_t i = 0; i < dts.size(); ++i) {
        if (std::abs(dts[i] - med) > 1e-6 * med) {
            throw ParseError("non-uniform timestamp spacing at row " + std::to_string(i + 3),
                             i + 3, time_col);
        }
    }

    Dataset d;
    d.series.samples = std::move(values);
    d.series.sample_rate = 1.0 / med;
    d.series.t0 = times.front();
    d.source_path = path;
    d.units = "A";
    d.series.validate();
    return d;
}

/// Writes a waveform as `time_s,current_a` rows with full double precision.
inline void write_waveform_csv(const WaveformSeries& s, const std::string& path,
                               const std::string& time_col = "time_s",
                               const std::string& value_col = "current_a") {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write CSV file: " + path);
    out << time_col << "," << value_col << "\n";
    char buf[80];
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.time_at(i), s.samples[i]);
        out << buf;
    }
}

/// Block bootstrap: the concatenation of ceil(n / block_len) uniformly chosen
/// contiguous blocks, truncated to n samples. Deterministic given the seed.
inline std::vector<double> block_bootstrap(const WaveformSeries& source, std::size_t block_len,
                                           std::size_t n, std::uint64_t seed) {
    source.validate();
    if (block_len == 0 || n == 0) {
        throw std::invalid_argument("block_bootstrap: block_len and n must be positive");
    }
    if (block_len > source.size()) {
        throw std::invalid_argument("block_bootstrap: block_len exceeds source length");
    }
    Rng rng(seed);
    const std::size_t n_starts = source.size() - block_len + 1;
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
        const std::size_t start = static_cast<std::size_t>(rng.uniform_index(n_starts));
        const std::size_t take = std::min(block_len, n - out.size());
        out.insert(out.end(), source.samples.begin() + static_cast<std::ptrdiff_t>(start),
                   source.samples.begin() + static_cast<std::ptrdiff_t>(start + take));
    }
    return out;
}

} // namespace cpw::ingest
