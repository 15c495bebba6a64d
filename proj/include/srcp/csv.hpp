#pragma once

// Comma-separated tables with '#'-prefixed metadata lines, one header row and
// LF line endings. Numbers are written with 17 significant digits, so a
// write/read cycle restores every double exactly.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "serialize.hpp"
#include "spectrum.hpp"

namespace srcp {

struct CsvTable {
    std::vector<std::string> comments;  // metadata lines without the leading "# "
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

    /// Column index by name, or -1.
    std::ptrdiff_t find(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }
};

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
    for (const auto& c : t.comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            out << (c ? "," : "") << format_double(t.columns[c][r]);
        out << '\n';
    }
}

inline void write_csv_file(const std::string& path, const CsvTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StorageError("cannot open for writing", path);
    write_csv(out, t);
    out.flush();
    if (!out) throw StorageError("write failed", path);
}

namespace csv_detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace csv_detail

/// Parses a table; every data row must have one finite number per header
/// column. Errors name the 1-based line number.
inline CsvTable read_csv(std::istream& in, const std::string& source = "csv") {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(msg, source + " line " + std::to_string(line_no));
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = csv_detail::trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            view.remove_prefix(1);
            if (!view.empty() && view.front() == ' ') view.remove_prefix(1);
            t.comments.emplace_back(view);
            continue;
        }
        const auto fields = csv_detail::split(view);
        if (t.header.empty()) {
            for (auto f : fields) {
                if (f.empty()) fail("empty column name in header");
                t.header.emplace_back(f);
            }
            t.columns.resize(t.header.size());
            continue;
        }
        if (fields.size() != t.header.size())
            fail("expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double x = 0.0;
            const char* b = fields[c].data();
            const char* e = b + fields[c].size();
            if (*b == '+') ++b;
            const auto res = std::from_chars(b, e, x);
            if (res.ec != std::errc() || res.ptr != e)
                fail("column '" + t.header[c] + "' is not a number: '" + std::string(fields[c]) + "'");
            if (!std::isfinite(x)) fail("column '" + t.header[c] + "' is not finite");
            t.columns[c].push_back(x);
        }
    }
    if (t.header.empty()) throw ConfigError("no header row", source);
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open for reading", path);
    return read_csv(in, path);
}

/// Spectrum columns detuning_mhz, re_isr, im_isr, signal, preceded by the
/// engine version, signal kind, optional run configuration and metadata.
inline CsvTable spectrum_table(const Spectrum& s, const json* config = nullptr) {
    CsvTable t;
    t.comments.push_back(std::string("engine_version: ") + engine_version);
    t.comments.push_back("kind: " + to_string(s.kind));
    if (config) t.comments.push_back("config: " + config->dump());
    t.comments.push_back("meta: " + to_json(s.meta).dump());
    for (const auto& w : s.meta.warnings) t.comments.push_back("warning: " + w);
    t.header = {"detuning_mhz", "re_isr", "im_isr", "signal"};
    t.columns.assign(4, {});
    for (std::size_t i = 0; i < s.detunings.size(); ++i) {
        t.columns[0].push_back(s.detunings[i]);
        t.columns[1].push_back(s.isr[i].real());
        t.columns[2].push_back(s.isr[i].imag());
        t.columns[3].push_back(s.signal[i]);
    }
    return t;
}

/// Value of a "key: value" metadata line, or empty.
inline std::string comment_value(const CsvTable& t, std::string_view key) {
    for (const auto& c : t.comments)
        if (c.size() > key.size() + 1 && c.compare(0, key.size(), key) == 0 && c[key.size()] == ':')
            return std::string(csv_detail::trim(std::string_view(c).substr(key.size() + 1)));
    return {};
}

/// Inverse of spectrum_table. Only detuning_mhz and signal are required; the
/// I_SR columns and metadata are restored when present.
inline Spectrum spectrum_from_table(const CsvTable& t, const std::string& source = "csv") {
    const auto id = t.find("detuning_mhz");
    const auto is = t.find("signal");
    if (id < 0 || is < 0) throw ConfigError("needs columns detuning_mhz and signal", source);
    Spectrum s;
    s.detunings = t.columns[static_cast<std::size_t>(id)];
    s.signal = t.columns[static_cast<std::size_t>(is)];
    if (s.detunings.empty()) throw ConfigError("no data rows", source);
    for (std::size_t i = 1; i < s.detunings.size(); ++i)
        if (!(s.detunings[i] > s.detunings[i - 1]))
            throw ConfigError("detuning_mhz must be strictly increasing", source + " data row " + std::to_string(i + 1));
    const auto ir = t.find("re_isr");
    const auto ii = t.find("im_isr");
    s.isr.resize(s.detunings.size());
    if (ir >= 0 && ii >= 0)
        for (std::size_t i = 0; i < s.isr.size(); ++i)
            s.isr[i] = {t.columns[static_cast<std::size_t>(ir)][i], t.columns[static_cast<std::size_t>(ii)][i]};
    if (auto kind = comment_value(t, "kind"); !kind.empty()) s.kind = signal_kind_from_string(kind);
    if (auto meta = comment_value(t, "meta"); !meta.empty()) {
        try {
            s.meta = meta_from_json(json::parse(meta));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("metadata is not valid JSON: ") + e.what(), source);
        }
    }
    return s;
}

}  // namespace srcp
