#pragma once

// Subcommands of the srcp tool. Each returns the process exit code:
//   0 success, 2 invalid configuration or data file, 3 engine convergence
//   failure, 4 fit not converged, 1 anything else.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "../csv.hpp"
#include "../curve_library.hpp"
#include "../fit.hpp"
#include "../parallel.hpp"
#include "../spectrum.hpp"
#include "config.hpp"

namespace srcp::cli {

enum ExitCode : int { ok = 0, failure = 1, invalid_input = 2, not_converged = 3, fit_failed = 4 };

/// Command-line flags that take precedence over the configuration file.
struct Overrides {
    std::optional<std::string> output;
    std::optional<std::string> format;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

inline void apply(RunConfig& c, const Overrides& o) {
    if (o.output) c.output_path = *o.output;
    if (o.format) {
        if (*o.format != "csv") throw ConfigError("only csv is supported", "--format");
        c.output_format = *o.format;
    }
    if (o.seed) c.seed = *o.seed;
    if (o.threads) {
        c.quad.threads = *o.threads;
        if (c.fit) c.fit->spec.quad.threads = *o.threads;
    }
    if (c.fit) c.fit->options.seed = c.seed;
}

/// Signal kind the spectrum command produces: the configured one, except that
/// the infinite-Doppler model defaults to its derivative.
inline SignalKind effective_kind(SignalKind requested, bool given, const VelocityModel& v) {
    if (std::holds_alternative<InfiniteDoppler>(v) && (!given || requested == SignalKind::SmallModFMSR))
        return SignalKind::InfiniteDopplerDerivative;
    return requested;
}

inline Spectrum compute_spectrum(std::span<const double> grid, const TransitionParams& p, const VelocityModel& v,
                                 SignalKind kind, const std::optional<ModulationParams>& mod,
                                 const QuadratureConfig& quad) {
    const NormalizationInfo norm = normalization(p);
    const ModulationParams m = mod.value_or(ModulationParams{1.0, 1.0, std::nullopt});
    switch (kind) {
        case SignalKind::Direct: return sr_signal(grid, p, v, quad, norm);
        case SignalKind::SmallModFMSR:
        case SignalKind::InfiniteDopplerDerivative: return fmsr_small_modulation(grid, p, v, quad, m, norm);
        case SignalKind::BesselFMSR: return fmsr_bessel(grid, p, v, quad, m, norm);
    }
    throw ContractViolation("unknown signal kind");
}

namespace cmd_detail {

inline void emit(const RunConfig& c, const CsvTable& t, std::ostream& out) {
    if (c.output_path.empty()) {
        write_csv(out, t);
    } else {
        write_csv_file(c.output_path, t);
    }
}

inline int spectrum_with(RunConfig& c, SignalKind kind, std::ostream& out) {
    const std::vector<double> grid = detunings(c);
    const Spectrum s = compute_spectrum(grid, c.transition, c.velocity, kind, c.modulation, c.quad);
    emit(c, spectrum_table(s, &c.raw), out);
    return ok;
}

inline std::string shortest(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace cmd_detail

/// Spectrum of the configured signal (direct unless `signal` says otherwise).
inline int cmd_spectrum(RunConfig& c, std::ostream& out) {
    return cmd_detail::spectrum_with(c, effective_kind(c.signal, c.signal_given, c.velocity), out);
}

/// FMSR spectrum: the sideband sum when signal is fmsr_bessel, otherwise the
/// small-modulation derivative.
inline int cmd_fmsr(RunConfig& c, std::ostream& out) {
    const SignalKind k = c.signal == SignalKind::BesselFMSR ? SignalKind::BesselFMSR : SignalKind::SmallModFMSR;
    return cmd_detail::spectrum_with(c, effective_kind(k, true, c.velocity), out);
}

inline json fit_report(const FitResult& r) {
    json best = json::object();
    for (std::size_t i = 0; i < fit_param_count; ++i) best[fit_param_names[i]] = r.best[i];
    json free = json::array();
    for (FitParam p : r.free) free.push_back(fit_param_names[static_cast<std::size_t>(p)]);
    return json{{"best", best},
                {"free", free},
                {"residual_norm", r.residual_norm},
                {"iterations", r.iterations},
                {"evaluations", r.evaluations},
                {"converged", r.converged},
                {"gradient_proxy", r.gradient_proxy},
                {"covariance_proxy", r.covariance_proxy},
                {"method", r.method},
                {"message", r.message}};
}

namespace cmd_detail {

inline CurveLibrary library_for(const FitConfig& f, const std::vector<double>& grid, std::ostream& log) {
    const LibraryConfig& lc = *f.library;
    if (!lc.path.empty() && std::filesystem::exists(std::filesystem::path(lc.path) / "index.json")) {
        CurveLibrary lib = load_curve_library(lc.path);
        const CurveModel probe(f.spec, grid);
        if (lib.detunings == grid && lib.c3_grid == lc.c3_grid && lib.gamma_grid == lc.gamma_grid &&
            to_json(lib.spec.fixed) == to_json(probe.spec().fixed) &&
            to_json(lib.spec.model) == to_json(probe.spec().model)) {
            log << "# reusing curve library " << lc.path << '\n';
            return lib;
        }
        log << "# curve library at " << lc.path << " does not match; rebuilding\n";
    }
    CurveLibrary lib = build_curve_library(f.spec, grid, lc.c3_grid, lc.gamma_grid);
    if (!lc.path.empty()) save_curve_library(lib, lc.path);
    return lib;
}

}  // namespace cmd_detail

/// Fits the spectrum in `data_csv` with the configured fit section. Prints a
/// text summary to `out`; the JSON report goes to the output path when set.
inline int cmd_fit(RunConfig& c, const std::string& data_csv, std::ostream& out) {
    if (!c.fit) throw ConfigError("required for the fit command", "fit");
    Spectrum data = spectrum_from_table(read_csv_file(data_csv), data_csv);
    FitConfig& f = *c.fit;
    if (f.window_mhz) {
        Spectrum w;
        for (std::size_t i = 0; i < data.detunings.size(); ++i)
            if (data.detunings[i] >= f.window_mhz->first && data.detunings[i] <= f.window_mhz->second) {
                w.detunings.push_back(data.detunings[i]);
                w.signal.push_back(data.signal[i]);
            }
        if (w.detunings.empty()) throw ConfigError("no data rows inside the window", "fit.window_mhz");
        data = std::move(w);
    }
    FitResult r;
    if (f.library) {
        const CurveLibrary lib = cmd_detail::library_for(f, data.detunings, out);
        const GridSearchResult g = grid_search(lib, data.signal);
        out << "# grid search start: c3_mhz_um3=" << at(g.theta, FitParam::c3)
            << " gamma_mhz=" << at(g.theta, FitParam::gamma) << '\n';
        r = fit_with_library(lib, data.signal, f.options);
    } else {
        r = fit(data, f.spec, f.options);
    }
    for (std::size_t i = 0; i < fit_param_count; ++i)
        out << fit_param_names[i] << " = " << format_double(r.best[i]) << '\n';
    out << "residual_norm = " << format_double(r.residual_norm) << '\n';
    out << "converged = " << (r.converged ? "true" : "false") << '\n';
    if (!r.message.empty()) out << "message = " << r.message << '\n';
    if (!c.output_path.empty()) {
        json report = fit_report(r);
        report["config"] = c.raw;
        report["data"] = data_csv;
        std::ofstream o(c.output_path, std::ios::binary);
        if (!o) throw StorageError("cannot open for writing", c.output_path);
        o << report.dump(1) << '\n';
    }
    return r.converged ? ok : fit_failed;
}

/// One signal column per variant on a shared detuning column.
inline int cmd_compare(RunConfig& c, std::ostream& out) {
    if (!c.compare) throw ConfigError("required for the compare command", "compare");
    const std::vector<double> grid = detunings(c);
    CsvTable t;
    t.comments.push_back(std::string("engine_version: ") + engine_version);
    t.comments.push_back("config: " + c.raw.dump());
    t.comments.push_back(std::string("normalized: ") + (c.compare->normalize ? "true" : "false"));
    t.header.push_back("detuning_mhz");
    t.columns.push_back(grid);
    for (const Variant& v : c.compare->variants) {
        const SignalKind kind = effective_kind(v.signal, true, v.velocity);
        std::vector<double> col =
            compute_spectrum(grid, v.transition, v.velocity, kind, c.modulation, c.quad).signal;
        if (c.compare->normalize) {
            double peak = 0.0;
            for (double y : col) peak = std::max(peak, std::abs(y));
            if (peak > 0.0)
                for (double& y : col) y /= peak;
        }
        t.header.push_back(v.label);
        t.columns.push_back(std::move(col));
    }
    cmd_detail::emit(c, t, out);
    return ok;
}

namespace cmd_detail {

struct SweepPoint {
    std::vector<double> values;  // one per axis
    std::string file;
};

inline RunConfig at_point(const RunConfig& base, const std::vector<SweepAxis>& axes, const std::vector<double>& values) {
    RunConfig c = base;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const std::string& n = axes[a].name;
        const double x = values[a];
        if (n == "lambda_um") c.transition.lambda_um = x;
        else if (n == "gamma_mhz") c.transition.gamma_mhz = x;
        else if (n == "c3_mhz_um3") c.transition.c3_mhz_um3 = x;
        else if (n == "c3_imag_mhz_um3") c.transition.c3_imag_mhz_um3 = x;
        else if (n == "c5_mhz_um5") c.transition.c5_mhz_um5 = x;
        else if (n == "temp_k") {
            auto* mb = std::get_if<MaxwellBoltzmann>(&c.velocity);
            if (!mb) throw ConfigError("temp_k needs the maxwell_boltzmann model", "sweep.axes.temp_k");
            mb->temperature_k = x;
        } else if (n == "m_mhz") {
            ModulationParams m = c.modulation.value_or(ModulationParams{1.0, 1.0, std::nullopt});
            m.amplitude_mhz = x;
            c.modulation = m;
        }
    }
    checked("sweep", [&] {
        validate(c.transition);
        validate(c.velocity);
        if (c.modulation) validate(*c.modulation);
    });
    return c;
}

// Everything a point's output depends on; stored in the completion marker.
inline json point_identity(const RunConfig& c, SignalKind kind, const std::vector<double>& grid) {
    json j{{"engine_version", engine_version},
           {"transition", to_json(c.transition)},
           {"velocity", to_json(c.velocity)},
           {"quadrature", to_json(c.quad)},
           {"kind", to_string(kind)},
           {"detunings_mhz", grid}};
    j["quadrature"].erase("threads");
    if (c.modulation) j["modulation"] = to_json(*c.modulation);
    return j;
}

}  // namespace cmd_detail

/// Spectra over the cartesian product of the sweep axes (first axis slowest).
/// Each point writes <file>.csv and then the marker <file>.done; a point is
/// skipped when both exist and the marker matches. index.json is written last.
inline int cmd_sweep(RunConfig& c, std::ostream& log) {
    namespace fs = std::filesystem;
    if (c.sweep.empty()) throw ConfigError("required for the sweep command", "sweep");
    const fs::path dir = c.output_path.empty() ? fs::path("sweep") : fs::path(c.output_path);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create directory: " + ec.message(), dir.string());

    std::vector<cmd_detail::SweepPoint> points(1);
    for (const SweepAxis& axis : c.sweep) {
        std::vector<cmd_detail::SweepPoint> next;
        for (const auto& p : points)
            for (double x : axis.values) {
                cmd_detail::SweepPoint q = p;
                q.values.push_back(x);
                q.file += (q.file.empty() ? "" : "__") + axis.name + "=" + cmd_detail::shortest(x);
                next.push_back(q);
            }
        points = std::move(next);
    }
    // Validate every point before any work starts.
    for (const auto& p : points) (void)cmd_detail::at_point(c, c.sweep, p.values);

    const unsigned workers = resolve_threads(c.quad.threads);
    std::vector<char> reused(points.size(), 0);
    parallel_chunks(points.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RunConfig pc = cmd_detail::at_point(c, c.sweep, points[i].values);
            pc.quad.threads = 1;
            const SignalKind kind = effective_kind(pc.signal, pc.signal_given, pc.velocity);
            const std::vector<double> grid = detunings(pc);
            const json identity = cmd_detail::point_identity(pc, kind, grid);
            const fs::path csv = dir / (points[i].file + ".csv");
            const fs::path done = dir / (points[i].file + ".done");
            if (fs::exists(csv) && fs::exists(done)) {
                std::ifstream in(done, std::ios::binary);
                try {
                    if (json::parse(in) == identity) {
                        reused[i] = 1;
                        continue;
                    }
                } catch (const json::exception&) {
                    // unreadable marker: regenerate
                }
            }
            fs::remove(done);
            const Spectrum s = compute_spectrum(grid, pc.transition, pc.velocity, kind, pc.modulation, pc.quad);
            write_csv_file(csv.string(), spectrum_table(s, &c.raw));
            std::ofstream m(done, std::ios::binary);
            m << identity.dump() << '\n';
            if (!m) throw StorageError("cannot write completion marker", done.string());
        }
    });

    json entries = json::array();
    for (const auto& p : points) {
        json params = json::object();
        for (std::size_t a = 0; a < c.sweep.size(); ++a) params[c.sweep[a].name] = p.values[a];
        entries.push_back({{"params", params}, {"file", p.file + ".csv"}});
    }
    json axes = json::object();
    for (const auto& a : c.sweep) axes[a.name] = a.values;
    const json index{{"engine_version", engine_version}, {"config", c.raw}, {"axes", axes}, {"points", entries}};
    const fs::path tmp = dir / "index.json.tmp";
    {
        std::ofstream o(tmp, std::ios::binary);
        o << index.dump(1) << '\n';
        if (!o) throw StorageError("cannot write sweep index", tmp.string());
    }
    fs::rename(tmp, dir / "index.json", ec);
    if (ec) throw StorageError("cannot rename sweep index: " + ec.message(), (dir / "index.json").string());
    std::size_t n_reused = 0;
    for (char r : reused) n_reused += static_cast<std::size_t>(r);
    log << "# sweep: " << points.size() << " points, " << points.size() - n_reused << " computed, " << n_reused
        << " reused\n";
    return ok;
}

/// Cutoff sensitivity at each probe detuning (default 0, +-5 Gamma, +-10 Gamma).
/// Exit code 3 when any probe fails.
inline int cmd_converge(RunConfig& c, std::ostream& out) {
    std::vector<double> probes = c.probes_mhz;
    if (probes.empty())
        for (double m : {-10.0, -5.0, 0.0, 5.0, 10.0}) probes.push_back(m * c.transition.gamma_mhz);
    CsvTable t;
    t.comments.push_back(std::string("engine_version: ") + engine_version);
    t.comments.push_back("config: " + c.raw.dump());
    t.comments.push_back("tol: " + format_double(resolve(c.quad, c.transition).convergence_tol));
    t.header = {"probe_mhz", "rel_zc", "rel_kc", "rel_delta", "pass"};
    t.columns.assign(5, {});
    bool all = true;
    for (double d : probes) {
        const ConvergenceReport r = convergence_check(c.transition, c.velocity, c.quad, d);
        t.columns[0].push_back(d);
        t.columns[1].push_back(r.rel_zc);
        t.columns[2].push_back(r.rel_kc);
        t.columns[3].push_back(r.rel_delta);
        t.columns[4].push_back(r.pass ? 1.0 : 0.0);
        all = all && r.pass;
    }
    cmd_detail::emit(c, t, out);
    return all ? ok : not_converged;
}

/// Runs `body`, translating exceptions into exit codes with a one-line
/// diagnostic on `err`.
inline int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << '\n';
        return not_converged;
    } catch (const AccuracyError& e) {
        err << "error: " << e.what() << '\n';
        return not_converged;
    } catch (const StorageError& e) {
        err << "error: " << e.what() << '\n';
        return invalid_input;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return invalid_input;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return invalid_input;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
}

}  // namespace srcp::cli
