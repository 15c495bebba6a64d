#pragma once

// Precomputed engine curves on a (c3, gamma) grid, used to start fits from
// the best grid point. On disk a library is a directory holding index.json
// and one CSV per grid point; index.json is written last.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "parallel.hpp"
#include "serialize.hpp"

namespace srcp {

inline constexpr const char* curve_library_format = "srcp-curve-library/1";

struct CurveLibrary {
    FitSpec spec;                    // quadrature frozen
    std::vector<double> detunings;   // data grid
    std::vector<double> grid;        // evaluation grid, data grid padded for shifts
    std::vector<double> c3_grid;
    std::vector<double> gamma_grid;
    std::vector<std::vector<double>> curves;  // index i_c3 * gamma_grid.size() + i_gamma

    const std::vector<double>& curve(std::size_t i_c3, std::size_t i_gamma) const {
        return curves.at(i_c3 * gamma_grid.size() + i_gamma);
    }

    /// The stored curve at a grid node, otherwise bilinear interpolation
    /// between the four surrounding nodes. Outside the grid is an error.
    std::vector<double> lookup(double c3, double gamma) const {
        auto bracket = [](const std::vector<double>& axis, double x, const char* name) {
            if (x < axis.front() || x > axis.back())
                throw DomainError(std::string("curve library: ") + name + " outside the grid");
            const auto it = std::lower_bound(axis.begin(), axis.end(), x);
            const auto hi = static_cast<std::size_t>(it - axis.begin());
            if (axis[hi] == x) return std::pair<std::size_t, double>{hi, 0.0};
            return std::pair<std::size_t, double>{hi - 1, (x - axis[hi - 1]) / (axis[hi] - axis[hi - 1])};
        };
        const auto [i, ti] = bracket(c3_grid, c3, "c3");
        const auto [j, tj] = bracket(gamma_grid, gamma, "gamma");
        if (ti == 0.0 && tj == 0.0) return curve(i, j);
        std::vector<double> out(grid.size(), 0.0);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const double w = (a ? ti : 1.0 - ti) * (b ? tj : 1.0 - tj);
                if (w == 0.0) continue;
                const auto& c = curve(i + static_cast<std::size_t>(a), j + static_cast<std::size_t>(b));
                for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * c[k];
            }
        return out;
    }

    /// Makes every stored curve available to `model` without engine calls.
    void seed(CurveModel& model) const {
        for (std::size_t i = 0; i < c3_grid.size(); ++i)
            for (std::size_t j = 0; j < gamma_grid.size(); ++j) model.insert(c3_grid[i], gamma_grid[j], curve(i, j));
    }
};

namespace library_detail {

inline void check_axis(const std::vector<double>& axis, const char* name) {
    if (axis.empty()) throw DomainError(std::string("curve library: empty ") + name + " grid");
    for (std::size_t i = 0; i < axis.size(); ++i) {
        if (!std::isfinite(axis[i])) throw DomainError(std::string("curve library: non-finite ") + name);
        if (i > 0 && !(axis[i] > axis[i - 1]))
            throw DomainError(std::string("curve library: ") + name + " grid must be strictly increasing");
    }
}

}  // namespace library_detail

/// Engine curves for every (c3, gamma) pair, computed in parallel over grid
/// points. The FitSpec quadrature is frozen once, so curves match the ones a
/// CurveModel built from the returned `spec` would compute.
inline CurveLibrary build_curve_library(const FitSpec& spec, std::span<const double> detunings,
                                        std::vector<double> c3_grid, std::vector<double> gamma_grid) {
    library_detail::check_axis(c3_grid, "c3");
    library_detail::check_axis(gamma_grid, "gamma");
    CurveModel model(spec, std::vector<double>(detunings.begin(), detunings.end()));
    CurveLibrary lib;
    lib.spec = model.spec();
    lib.detunings = model.data_grid();
    lib.grid = model.grid();
    lib.c3_grid = std::move(c3_grid);
    lib.gamma_grid = std::move(gamma_grid);
    const std::size_t n = lib.c3_grid.size() * lib.gamma_grid.size();
    lib.curves.resize(n);
    const unsigned threads = lib.spec.quad.threads;
    // One engine call per worker at a time; each runs single-threaded.
    FitSpec serial = lib.spec;
    serial.quad.threads = 1;
    const CurveModel worker_model(serial, lib.detunings);
    parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double c3 = lib.c3_grid[k / lib.gamma_grid.size()];
            const double gamma = lib.gamma_grid[k % lib.gamma_grid.size()];
            lib.curves[k] = worker_model.engine_spectrum(c3, gamma, lib.grid).signal;
        }
    });
    return lib;
}

inline std::string curve_file_name(std::size_t i_c3, std::size_t i_gamma) {
    return "curve_c" + std::to_string(i_c3) + "_g" + std::to_string(i_gamma) + ".csv";
}

inline void save_curve_library(const CurveLibrary& lib, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create directory: " + ec.message(), dir.string());
    json entries = json::array();
    for (std::size_t i = 0; i < lib.c3_grid.size(); ++i)
        for (std::size_t j = 0; j < lib.gamma_grid.size(); ++j) {
            CsvTable t;
            t.comments = {"c3_mhz_um3: " + format_double(lib.c3_grid[i]),
                          "gamma_mhz: " + format_double(lib.gamma_grid[j])};
            t.header = {"detuning_mhz", "signal"};
            t.columns = {lib.grid, lib.curve(i, j)};
            const std::string name = curve_file_name(i, j);
            write_csv_file((dir / name).string(), t);
            entries.push_back({{"c3_mhz_um3", lib.c3_grid[i]}, {"gamma_mhz", lib.gamma_grid[j]}, {"file", name}});
        }
    const json index{{"format", curve_library_format},
                     {"engine_version", engine_version},
                     {"spec", to_json(lib.spec)},
                     {"detunings_mhz", lib.detunings},
                     {"c3_grid_mhz_um3", lib.c3_grid},
                     {"gamma_grid_mhz", lib.gamma_grid},
                     {"curves", entries}};
    const fs::path path = dir / "index.json";
    const fs::path tmp = dir / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw StorageError("cannot open for writing", tmp.string());
        out << index.dump(1) << '\n';
        if (!out) throw StorageError("write failed", tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw StorageError("cannot rename index: " + ec.message(), path.string());
}

inline CurveLibrary load_curve_library(const std::filesystem::path& dir) {
    const std::string index_path = (dir / "index.json").string();
    std::ifstream in(index_path, std::ios::binary);
    if (!in) throw StorageError("cannot open curve library index", index_path);
    json index;
    try {
        index = json::parse(in);
    } catch (const json::exception& e) {
        throw StorageError(std::string("index is not valid JSON: ") + e.what(), index_path);
    }
    CurveLibrary lib;
    try {
        if (index.at("format").get<std::string>() != curve_library_format)
            throw StorageError("unknown curve library format", index_path);
        lib.spec = fit_spec_from_json(index.at("spec"), "spec");
        lib.detunings = index.at("detunings_mhz").get<std::vector<double>>();
        lib.c3_grid = index.at("c3_grid_mhz_um3").get<std::vector<double>>();
        lib.gamma_grid = index.at("gamma_grid_mhz").get<std::vector<double>>();
        library_detail::check_axis(lib.c3_grid, "c3");
        library_detail::check_axis(lib.gamma_grid, "gamma");
        lib.grid = CurveModel(lib.spec, lib.detunings).grid();
        const json& entries = index.at("curves");
        if (entries.size() != lib.c3_grid.size() * lib.gamma_grid.size())
            throw StorageError("index lists the wrong number of curves", index_path);
        lib.curves.resize(entries.size());
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const std::string file = (dir / entries[k].at("file").get<std::string>()).string();
            const CsvTable t = read_csv_file(file);
            const auto is = t.find("signal");
            const auto id = t.find("detuning_mhz");
            if (is < 0 || id < 0) throw StorageError("curve file lacks detuning_mhz/signal", file);
            if (t.columns[static_cast<std::size_t>(id)] != lib.grid)
                throw StorageError("curve file grid does not match the library", file);
            lib.curves[k] = t.columns[static_cast<std::size_t>(is)];
        }
    } catch (const StorageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StorageError(e.what(), index_path);
    }
    return lib;
}

struct GridSearchResult {
    std::size_t i_c3 = 0;
    std::size_t i_gamma = 0;
    FitVector theta{};  // best grid point with amplitude and offset solved
    double rms = 0.0;
};

/// Best library curve for `data` (on lib.detunings), at the FitSpec initial shift.
inline GridSearchResult grid_search(const CurveLibrary& lib, std::span<const double> data) {
    CurveModel model(lib.spec, lib.detunings);
    lib.seed(model);
    fit_detail::Problem prob(model, data);
    GridSearchResult best;
    double best_ss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lib.c3_grid.size(); ++i)
        for (std::size_t j = 0; j < lib.gamma_grid.size(); ++j) {
            FitVector theta = lib.spec.initial;
            at(theta, FitParam::c3) = lib.c3_grid[i];
            at(theta, FitParam::gamma) = lib.gamma_grid[j];
            const std::vector<double> r = prob.residuals(theta);
            double ss = 0.0;
            for (double x : r) ss += x * x;
            if (ss < best_ss) {
                best_ss = ss;
                best = {i, j, theta, std::sqrt(ss / static_cast<double>(r.size()))};
            }
        }
    return best;
}

/// Grid search followed by a local fit started from the best grid point.
/// The start is clamped into the FitSpec bounds.
inline FitResult fit_with_library(const CurveLibrary& lib, std::span<const double> data,
                                  const FitOptions& opt = {}) {
    const GridSearchResult g = grid_search(lib, data);
    FitSpec spec = lib.spec;
    for (std::size_t i = 0; i < fit_param_count; ++i)
        spec.initial[i] = std::clamp(g.theta[i], spec.bounds[i].lo, spec.bounds[i].hi);
    CurveModel model(spec, lib.detunings);
    lib.seed(model);
    return fit(model, data, opt);
}

}  // namespace srcp
