#pragma once

// Run configuration: one JSON document with unit-suffixed keys.
//
//   transition  lambda_um, gamma_mhz, c3_mhz_um3 (required), c3_imag_mhz_um3,
//               c5_mhz_um5, window_index, dipole_cm, density_m3
//   velocity    model (maxwell_boltzmann | infinite_doppler | motionless),
//               temp_k, mass_amu, plateau_speed_m_s
//   signal      direct | fmsr | fmsr_bessel
//   modulation  m_mhz, f_fm_mhz, n_max
//   grid        delta_start_mhz, delta_stop_mhz, delta_step_mhz
//   quadrature  see quadrature_from_json
//   fit         model, signal, free, initial, bounds, method, restarts,
//               max_evaluations, gtol, window_mhz, library
//   compare     variants [{label, velocity, transition, signal}], normalize
//   sweep       axes {name: [values]}
//   converge    probes_mhz
//   output      path, format
//   seed

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../curve_library.hpp"
#include "../fit.hpp"
#include "../serialize.hpp"
#include "../spectrum.hpp"

namespace srcp::cli {

inline constexpr std::uint64_t default_seed = 20240521;

struct GridConfig {
    std::optional<double> start_mhz, stop_mhz, step_mhz;  // defaults -20 Gamma, +20 Gamma, Gamma/4
};

struct LibraryConfig {
    std::vector<double> c3_grid;
    std::vector<double> gamma_grid;
    std::string path;  // reused when it holds a matching library; written otherwise
};

struct FitConfig {
    FitSpec spec;
    FitOptions options;
    std::optional<std::pair<double, double>> window_mhz;
    std::optional<LibraryConfig> library;
};

struct Variant {
    std::string label;
    TransitionParams transition;
    VelocityModel velocity;
    SignalKind signal = SignalKind::Direct;
};

struct CompareConfig {
    std::vector<Variant> variants;
    bool normalize = false;
};

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

struct RunConfig {
    json raw;  // the document as parsed, echoed into every output
    TransitionParams transition;
    VelocityModel velocity = MaxwellBoltzmann{};
    SignalKind signal = SignalKind::Direct;
    bool signal_given = false;
    std::optional<ModulationParams> modulation;
    GridConfig grid;
    QuadratureConfig quad;
    std::optional<FitConfig> fit;
    std::optional<CompareConfig> compare;
    std::vector<SweepAxis> sweep;
    std::vector<double> probes_mhz;
    std::string output_path;
    std::string output_format = "csv";
    std::uint64_t seed = default_seed;
};

inline const std::vector<std::string>& sweep_axis_names() {
    static const std::vector<std::string> names{"lambda_um", "gamma_mhz",  "c3_mhz_um3", "c3_imag_mhz_um3",
                                                "c5_mhz_um5", "temp_k",    "m_mhz"};
    return names;
}

/// Signal kind from its configuration name. The infinite-Doppler model maps
/// fmsr to its derivative kind.
inline SignalKind signal_from_name(const std::string& s, const std::string& path) {
    if (s == "direct") return SignalKind::Direct;
    if (s == "fmsr") return SignalKind::SmallModFMSR;
    if (s == "fmsr_bessel") return SignalKind::BesselFMSR;
    throw ConfigError("signal must be direct, fmsr or fmsr_bessel", path);
}

namespace config_detail {

inline std::vector<double> number_array(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty array of numbers", path);
    std::vector<double> out;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError("expected a non-empty array of numbers", path);
        out.push_back(x.get<double>());
    }
    return out;
}

// Override keys of `patch` on top of `base` (one level deep).
inline json merged(json base, const json& patch, const std::string& path) {
    if (!patch.is_object()) throw ConfigError("expected an object", path);
    for (auto it = patch.begin(); it != patch.end(); ++it) base[it.key()] = it.value();
    return base;
}

inline FitConfig parse_fit(const json& j, const RunConfig& run) {
    ObjectReader r(j, "fit");
    FitConfig f;
    f.spec.fixed = run.transition;
    f.spec.quad = run.quad;
    // Defaults follow the run: same velocity model and signal as the data.
    f.spec.model = run.velocity;
    f.spec.signal = run.signal == SignalKind::Direct       ? FitSignal::Direct
                    : run.signal == SignalKind::BesselFMSR ? FitSignal::FMSRBessel
                                                           : FitSignal::FMSR;
    if (run.modulation) f.spec.modulation = *run.modulation;
    fit_spec_from_json(f.spec, r, "fit");
    if (r.has("method")) {
        const std::string m = r.req<std::string>("method");
        if (m == "nelder_mead") f.options.method = Optimizer::NelderMead;
        else if (m == "levenberg_marquardt") f.options.method = Optimizer::LevenbergMarquardt;
        else throw ConfigError("method must be nelder_mead or levenberg_marquardt", r.key_path("method"));
    }
    f.options.restarts = r.get("restarts", f.options.restarts);
    f.options.max_evaluations = r.get("max_evaluations", f.options.max_evaluations);
    f.options.gtol = r.get("gtol", f.options.gtol);
    f.options.xtol = r.get("xtol", f.options.xtol);
    f.options.ftol = r.get("ftol", f.options.ftol);
    if (f.options.restarts < 0 || f.options.max_evaluations < 1 || !(f.options.gtol > 0.0))
        throw ConfigError("need restarts >= 0, max_evaluations >= 1, gtol > 0", "fit");
    if (r.has("window_mhz")) {
        const auto w = number_array(r.raw("window_mhz"), r.key_path("window_mhz"));
        if (w.size() != 2 || !(w[0] < w[1])) throw ConfigError("expected [lo, hi] with lo < hi", r.key_path("window_mhz"));
        f.window_mhz = std::make_pair(w[0], w[1]);
    }
    if (r.has("library")) {
        ObjectReader lr(r.raw("library"), r.key_path("library"));
        LibraryConfig lib;
        lib.c3_grid = number_array(lr.raw("c3_grid_mhz_um3"), lr.key_path("c3_grid_mhz_um3"));
        lib.gamma_grid = number_array(lr.raw("gamma_grid_mhz"), lr.key_path("gamma_grid_mhz"));
        lib.path = lr.get<std::string>("path", "");
        lr.finish();
        f.library = lib;
    }
    r.finish();
    return f;
}

inline CompareConfig parse_compare(const json& j, const RunConfig& run) {
    ObjectReader r(j, "compare");
    CompareConfig c;
    c.normalize = r.get("normalize", false);
    const json& vs = r.raw("variants");
    if (!vs.is_array() || vs.size() < 2)
        throw ConfigError("expected an array of at least two variants", "compare.variants");
    const json base_transition = to_json(run.transition);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const std::string path = "compare.variants[" + std::to_string(i) + "]";
        ObjectReader vr(vs[i], path);
        Variant v;
        v.label = vr.req<std::string>("label");
        v.transition = vr.has("transition")
                           ? transition_from_json(merged(base_transition, vr.raw("transition"), path + ".transition"),
                                                  path + ".transition")
                           : run.transition;
        v.velocity = vr.has("velocity") ? velocity_from_json(vr.raw("velocity"), path + ".velocity") : run.velocity;
        v.signal = vr.has("signal") ? signal_from_name(vr.req<std::string>("signal"), vr.key_path("signal")) : run.signal;
        vr.finish();
        c.variants.push_back(v);
    }
    r.finish();
    return c;
}

}  // namespace config_detail

/// Parses a configuration document. Errors are ConfigError naming the line
/// (syntax) or the key path (content).
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
    RunConfig c;
    try {
        c.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports the byte offset; translate it to a line number.
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError(std::string("invalid JSON: ") + e.what(), source + " line " + std::to_string(line));
    }
    ObjectReader r(c.raw, "");
    c.transition = transition_from_json(r.raw("transition"), "transition");
    if (r.has("velocity")) c.velocity = velocity_from_json(r.raw("velocity"), "velocity");
    else throw ConfigError("required key is missing", "velocity");
    if (r.has("signal")) {
        c.signal = signal_from_name(r.req<std::string>("signal"), "signal");
        c.signal_given = true;
    }
    if (r.has("modulation")) c.modulation = modulation_from_json(r.raw("modulation"), "modulation");
    if (r.has("grid")) {
        ObjectReader g(r.raw("grid"), "grid");
        c.grid.start_mhz = g.opt<double>("delta_start_mhz");
        c.grid.stop_mhz = g.opt<double>("delta_stop_mhz");
        c.grid.step_mhz = g.opt<double>("delta_step_mhz");
        g.finish();
    }
    if (r.has("quadrature")) c.quad = quadrature_from_json(r.raw("quadrature"), "quadrature");
    if (r.has("fit")) c.fit = config_detail::parse_fit(r.raw("fit"), c);
    if (r.has("compare")) c.compare = config_detail::parse_compare(r.raw("compare"), c);
    if (r.has("sweep")) {
        ObjectReader s(r.raw("sweep"), "sweep");
        ObjectReader axes(s.raw("axes"), "sweep.axes");
        for (const auto& name : sweep_axis_names())
            if (axes.has(name))
                c.sweep.push_back({name, config_detail::number_array(axes.raw(name), axes.key_path(name))});
        axes.finish();
        s.finish();
        if (c.sweep.empty()) throw ConfigError("at least one axis is required", "sweep.axes");
    }
    if (r.has("converge")) {
        ObjectReader v(r.raw("converge"), "converge");
        if (v.has("probes_mhz")) c.probes_mhz = config_detail::number_array(v.raw("probes_mhz"), "converge.probes_mhz");
        v.finish();
    }
    if (r.has("output")) {
        ObjectReader o(r.raw("output"), "output");
        c.output_path = o.get<std::string>("path", "");
        c.output_format = o.get<std::string>("format", "csv");
        o.finish();
        if (c.output_format != "csv") throw ConfigError("only csv is supported", "output.format");
    }
    if (r.has("seed")) {
        const json& s = r.raw("seed");
        if (!s.is_number_unsigned()) throw ConfigError("expected a non-negative integer", "seed");
        c.seed = s.get<std::uint64_t>();
    }
    r.finish();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open configuration file", path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

/// Detunings of the configured grid; a step wider than the span yields one row.
inline std::vector<double> detunings(const RunConfig& c) {
    const double g = c.transition.gamma_mhz;
    const double start = c.grid.start_mhz.value_or(-20.0 * g);
    const double stop = c.grid.stop_mhz.value_or(20.0 * g);
    const double step = c.grid.step_mhz.value_or(0.25 * g);
    try {
        return detuning_grid(start, stop, step);
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), "grid");
    }
}

}  // namespace srcp::cli
