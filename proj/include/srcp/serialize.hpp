#pragma once

// JSON mapping of the parameter types. Keys carry their units. Readers are
// strict: a key they do not know is an error, reported with its path.

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "params.hpp"
#include "spectrum.hpp"

namespace srcp {

using json = nlohmann::json;

/// Reads one JSON object, remembering which keys were consumed.
class ObjectReader {
  public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("expected an object", path_);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& raw(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError("required key is missing", key_path(key));
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    std::optional<T> opt(const std::string& key) {
        if (!j_.contains(key)) return std::nullopt;
        seen_.insert(key);
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError("expected a number", key_path(key));
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer()) throw ConfigError("expected an integer", key_path(key));
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("expected true or false", key_path(key));
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("expected a string", key_path(key));
        }
        try {
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(e.what(), key_path(key));
        }
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        return opt<T>(key).value_or(fallback);
    }

    template <class T>
    T req(const std::string& key) {
        auto v = opt<T>(key);
        if (!v) throw ConfigError("required key is missing", key_path(key));
        return *v;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key", key_path(it.key()));
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Domain errors raised while validating a parsed section are re-thrown with the section path.
template <class F>
void checked(const std::string& path, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), path);
    }
}

inline json to_json(const TransitionParams& p) {
    json j{{"lambda_um", p.lambda_um},
           {"gamma_mhz", p.gamma_mhz},
           {"c3_mhz_um3", p.c3_mhz_um3},
           {"c3_imag_mhz_um3", p.c3_imag_mhz_um3},
           {"c5_mhz_um5", p.c5_mhz_um5},
           {"window_index", p.window_index}};
    if (p.dipole_cm) j["dipole_cm"] = *p.dipole_cm;
    if (p.density_m3) j["density_m3"] = *p.density_m3;
    return j;
}

inline TransitionParams transition_from_json(const json& j, const std::string& path = "transition") {
    ObjectReader r(j, path);
    TransitionParams p;
    p.lambda_um = r.req<double>("lambda_um");
    p.gamma_mhz = r.req<double>("gamma_mhz");
    p.c3_mhz_um3 = r.req<double>("c3_mhz_um3");
    p.c3_imag_mhz_um3 = r.get("c3_imag_mhz_um3", 0.0);
    p.c5_mhz_um5 = r.get("c5_mhz_um5", 0.0);
    p.window_index = r.get("window_index", p.window_index);
    p.dipole_cm = r.opt<double>("dipole_cm");
    p.density_m3 = r.opt<double>("density_m3");
    r.finish();
    checked(path, [&] { validate(p); });
    return p;
}

inline json to_json(const VelocityModel& m) {
    json j{{"model", model_name(m)}};
    if (const auto* mb = std::get_if<MaxwellBoltzmann>(&m)) {
        j["temp_k"] = mb->temperature_k;
        j["mass_amu"] = mb->mass_amu;
    } else if (const auto* inf = std::get_if<InfiniteDoppler>(&m)) {
        j["plateau_speed_m_s"] = inf->plateau_speed_m_s;
    }
    return j;
}

inline VelocityModel velocity_from_json(const json& j, const std::string& path = "velocity") {
    ObjectReader r(j, path);
    const std::string name = r.req<std::string>("model");
    VelocityModel m;
    if (name == "maxwell_boltzmann") {
        MaxwellBoltzmann mb;
        mb.temperature_k = r.req<double>("temp_k");
        mb.mass_amu = r.get("mass_amu", mb.mass_amu);
        m = mb;
    } else if (name == "infinite_doppler") {
        InfiniteDoppler inf;
        inf.plateau_speed_m_s = r.get("plateau_speed_m_s", inf.plateau_speed_m_s);
        m = inf;
    } else if (name == "motionless") {
        m = Motionless{};
    } else {
        throw ConfigError("model must be maxwell_boltzmann, infinite_doppler or motionless",
                          r.key_path("model"));
    }
    r.finish();
    checked(path, [&] { validate(m); });
    return m;
}

inline json to_json(const ModulationParams& m) {
    json j{{"m_mhz", m.amplitude_mhz}, {"f_fm_mhz", m.f_fm_mhz}};
    j["n_max"] = m.n_max ? json(*m.n_max) : json("auto");
    return j;
}

inline ModulationParams modulation_from_json(const json& j, const std::string& path = "modulation") {
    ObjectReader r(j, path);
    ModulationParams m;
    m.amplitude_mhz = r.req<double>("m_mhz");
    m.f_fm_mhz = r.get("f_fm_mhz", m.f_fm_mhz);
    if (r.has("n_max")) {
        const json& n = r.raw("n_max");
        if (n.is_string() && n.get<std::string>() == "auto") m.n_max = std::nullopt;
        else if (n.is_number_integer()) m.n_max = n.get<int>();
        else throw ConfigError("expected an integer or \"auto\"", r.key_path("n_max"));
    }
    r.finish();
    checked(path, [&] { validate(m); });
    return m;
}

inline json to_json(const QuadratureConfig& q) {
    return json{{"dz_um", q.dz_um},
                {"dz_far_um", q.dz_far_um},
                {"far_start_um", q.far_start_um},
                {"zc_um", q.z_c_um},
                {"kc_per_um", q.k_c_per_um},
                {"zmax_um", q.z_max_um},
                {"wall_start_um", q.wall_start_um},
                {"wall_grading", q.wall_grading},
                {"v_panel_m_s", q.v_panel_m_s},
                {"v_gauss_points", q.v_gauss_points},
                {"v_growth", q.v_growth},
                {"v_max_factor", q.v_max_factor},
                {"v_max_infinite_m_s", q.v_max_infinite_m_s},
                {"tol", q.convergence_tol},
                {"threads", q.threads}};
}

/// Zero (or an absent key) leaves a knob to be derived from the transition.
inline QuadratureConfig quadrature_from_json(const json& j, const std::string& path = "quadrature") {
    ObjectReader r(j, path);
    QuadratureConfig q;
    q.dz_um = r.get("dz_um", q.dz_um);
    q.dz_far_um = r.get("dz_far_um", q.dz_far_um);
    q.far_start_um = r.get("far_start_um", q.far_start_um);
    q.z_c_um = r.get("zc_um", q.z_c_um);
    q.k_c_per_um = r.get("kc_per_um", q.k_c_per_um);
    q.z_max_um = r.get("zmax_um", q.z_max_um);
    q.wall_start_um = r.get("wall_start_um", q.wall_start_um);
    q.wall_grading = r.get("wall_grading", q.wall_grading);
    q.v_panel_m_s = r.get("v_panel_m_s", q.v_panel_m_s);
    q.v_gauss_points = r.get("v_gauss_points", q.v_gauss_points);
    q.v_growth = r.get("v_growth", q.v_growth);
    q.v_max_factor = r.get("v_max_factor", q.v_max_factor);
    q.v_max_infinite_m_s = r.get("v_max_infinite_m_s", q.v_max_infinite_m_s);
    q.convergence_tol = r.get("tol", q.convergence_tol);
    const int threads = r.get("threads", 0);
    if (threads < 0) throw ConfigError("must be >= 0", r.key_path("threads"));
    q.threads = static_cast<unsigned>(threads);
    r.finish();
    for (double x : {q.dz_um, q.dz_far_um, q.far_start_um, q.z_c_um, q.k_c_per_um, q.z_max_um, q.wall_start_um, q.v_panel_m_s})
        if (x < 0.0) throw ConfigError("lengths, steepness and panel width must be >= 0", path);
    return q;
}

inline json to_json(const NormalizationInfo& n) {
    return json{{"prefactor", n.prefactor}, {"arbitrary_units", n.arbitrary_units}};
}

inline NormalizationInfo normalization_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    NormalizationInfo n;
    n.prefactor = r.req<double>("prefactor");
    n.arbitrary_units = r.req<bool>("arbitrary_units");
    r.finish();
    return n;
}

inline json to_json(const SpectrumMeta& m) {
    json j{{"transition", to_json(m.transition)},
           {"velocity", to_json(m.velocity)},
           {"quadrature", to_json(m.quadrature)},
           {"normalization", to_json(m.norm)},
           {"warnings", m.warnings}};
    if (m.modulation) j["modulation"] = to_json(*m.modulation);
    return j;
}

inline SpectrumMeta meta_from_json(const json& j, const std::string& path = "meta") {
    ObjectReader r(j, path);
    SpectrumMeta m;
    m.transition = transition_from_json(r.raw("transition"), r.key_path("transition"));
    m.velocity = velocity_from_json(r.raw("velocity"), r.key_path("velocity"));
    m.quadrature = quadrature_from_json(r.raw("quadrature"), r.key_path("quadrature"));
    if (r.has("modulation")) m.modulation = modulation_from_json(r.raw("modulation"), r.key_path("modulation"));
    m.norm = normalization_from_json(r.raw("normalization"), r.key_path("normalization"));
    if (r.has("warnings")) {
        const json& w = r.raw("warnings");
        if (!w.is_array()) throw ConfigError("expected an array of strings", r.key_path("warnings"));
        for (const auto& s : w) m.warnings.push_back(s.get<std::string>());
    }
    r.finish();
    return m;
}

inline SignalKind signal_kind_from_string(const std::string& s) {
    for (SignalKind k : {SignalKind::Direct, SignalKind::SmallModFMSR, SignalKind::BesselFMSR,
                         SignalKind::InfiniteDopplerDerivative})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown signal kind '" + s + "'", "kind");
}

inline std::string to_string(FitSignal s) {
    switch (s) {
        case FitSignal::Direct: return "direct";
        case FitSignal::FMSR: return "fmsr";
        case FitSignal::FMSRBessel: return "fmsr_bessel";
    }
    return "fmsr";
}

inline FitSignal fit_signal_from_string(const std::string& s, const std::string& path) {
    if (s == "direct") return FitSignal::Direct;
    if (s == "fmsr") return FitSignal::FMSR;
    if (s == "fmsr_bessel") return FitSignal::FMSRBessel;
    throw ConfigError("signal must be direct, fmsr or fmsr_bessel", path);
}

namespace serialize_detail {

// JSON has no infinities; an open bound is written as null.
inline json bound_value(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline double bound_from(const json& j, double open, const std::string& path) {
    if (j.is_null()) return open;
    if (!j.is_number()) throw ConfigError("expected a number or null", path);
    return j.get<double>();
}

}  // namespace serialize_detail

/// Fit section. `fixed` and `quad` are written too so that a curve library
/// index is self-describing; in a run configuration they come from the
/// top-level transition and quadrature sections instead.
inline json to_json(const FitSpec& s, bool with_fixed = true) {
    json j;
    j["model"] = to_json(s.model);
    j["signal"] = to_string(s.signal);
    j["modulation"] = to_json(s.modulation);
    json free = json::array();
    for (FitParam p : s.free) free.push_back(fit_param_names[static_cast<std::size_t>(p)]);
    j["free"] = free;
    json initial = json::object();
    json bounds = json::object();
    for (std::size_t i = 0; i < fit_param_count; ++i) {
        initial[fit_param_names[i]] = s.initial[i];
        bounds[fit_param_names[i]] = json::array(
            {serialize_detail::bound_value(s.bounds[i].lo), serialize_detail::bound_value(s.bounds[i].hi)});
    }
    j["initial"] = initial;
    j["bounds"] = bounds;
    if (with_fixed) {
        j["fixed"] = to_json(s.fixed);
        j["quadrature"] = to_json(s.quad);
    }
    return j;
}

/// Reads the keys of a fit section into `s`, which already carries the
/// fixed transition and quadrature of the run.
inline void fit_spec_from_json(FitSpec& s, ObjectReader& r, const std::string& path) {
    if (r.has("model")) s.model = velocity_from_json(r.raw("model"), r.key_path("model"));
    if (r.has("signal")) s.signal = fit_signal_from_string(r.req<std::string>("signal"), r.key_path("signal"));
    if (r.has("modulation")) s.modulation = modulation_from_json(r.raw("modulation"), r.key_path("modulation"));
    if (r.has("fixed")) s.fixed = transition_from_json(r.raw("fixed"), r.key_path("fixed"));
    if (r.has("quadrature")) s.quad = quadrature_from_json(r.raw("quadrature"), r.key_path("quadrature"));
    // Default start and bounds scale with the configured transition.
    const double c3 = s.fixed.c3_mhz_um3;
    const double gamma = s.fixed.gamma_mhz;
    at(s.initial, FitParam::c3) = c3;
    at(s.initial, FitParam::gamma) = gamma;
    s.bounds[static_cast<std::size_t>(FitParam::c3)] = {0.0, c3 > 0.0 ? 3.0 * c3 : 1.0};
    s.bounds[static_cast<std::size_t>(FitParam::gamma)] = {0.2 * gamma, 5.0 * gamma};
    s.bounds[static_cast<std::size_t>(FitParam::shift)] = {-gamma, gamma};
    if (r.has("free")) {
        const json& f = r.raw("free");
        if (!f.is_array()) throw ConfigError("expected an array of parameter names", r.key_path("free"));
        s.free.clear();
        for (const auto& name : f) {
            if (!name.is_string()) throw ConfigError("expected parameter names", r.key_path("free"));
            try {
                s.free.push_back(fit_param_from_name(name.get<std::string>()));
            } catch (const DomainError& e) {
                throw ConfigError(e.what(), r.key_path("free"));
            }
        }
    }
    if (r.has("initial")) {
        ObjectReader ir(r.raw("initial"), r.key_path("initial"));
        for (std::size_t i = 0; i < fit_param_count; ++i)
            if (auto v = ir.opt<double>(fit_param_names[i])) s.initial[i] = *v;
        ir.finish();
    }
    if (r.has("bounds")) {
        ObjectReader br(r.raw("bounds"), r.key_path("bounds"));
        for (std::size_t i = 0; i < fit_param_count; ++i) {
            if (!br.has(fit_param_names[i])) continue;
            const std::string kp = br.key_path(fit_param_names[i]);
            const json& b = br.raw(fit_param_names[i]);
            if (!b.is_array() || b.size() != 2) throw ConfigError("expected [lo, hi]", kp);
            s.bounds[i].lo = serialize_detail::bound_from(b[0], -std::numeric_limits<double>::infinity(), kp);
            s.bounds[i].hi = serialize_detail::bound_from(b[1], std::numeric_limits<double>::infinity(), kp);
        }
        br.finish();
    }
    checked(path, [&] { validate(s); });
}

inline FitSpec fit_spec_from_json(const json& j, const std::string& path = "fit") {
    ObjectReader r(j, path);
    FitSpec s;
    if (!r.has("fixed")) throw ConfigError("required key is missing", r.key_path("fixed"));
    fit_spec_from_json(s, r, path);
    r.finish();
    return s;
}

}  // namespace srcp
