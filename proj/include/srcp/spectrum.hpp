#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "engine.hpp"
#include "errors.hpp"
#include "params.hpp"
#include "physics.hpp"
#include "units.hpp"

namespace srcp {

inline constexpr const char* engine_version = "1.0.0";

enum class SignalKind { Direct, SmallModFMSR, BesselFMSR, InfiniteDopplerDerivative };

inline std::string to_string(SignalKind k) {
    switch (k) {
        case SignalKind::Direct: return "direct";
        case SignalKind::SmallModFMSR: return "fmsr";
        case SignalKind::BesselFMSR: return "fmsr_bessel";
        case SignalKind::InfiniteDopplerDerivative: return "infinite_doppler_derivative";
    }
    return "direct";
}

/// Multiplier turning Re[I_SR] into the reflectivity change.
struct NormalizationInfo {
    double prefactor = 1.0;
    bool arbitrary_units = true;
};

/// -4 N mu^2 k n / (eps0 hbar (n^2 - 1)), applied to I_SR in internal units
/// (um * us). Arbitrary units when the dipole moment or density is missing.
inline NormalizationInfo normalization(const TransitionParams& p) {
    validate(p);
    if (!p.dipole_cm || !p.density_m3) return {};
    const double n = p.window_index;
    const double k_si = p.k_per_um() / units::um_to_m;
    const double mu = *p.dipole_cm;
    const double pref = -4.0 * *p.density_m3 * mu * mu * k_si * n /
                        (units::epsilon0_f_per_m * units::hbar_j_s * (n * n - 1.0));
    return {pref * units::isr_to_si, false};
}

struct SpectrumMeta {
    TransitionParams transition;
    VelocityModel velocity;
    QuadratureConfig quadrature;
    std::optional<ModulationParams> modulation;
    NormalizationInfo norm;
    std::vector<std::string> warnings;
};

/// `isr` holds I_SR(delta), except for kind InfiniteDopplerDerivative where it
/// holds dI_SR/d delta.
struct Spectrum {
    std::vector<double> detunings;
    std::vector<cplx> isr;
    std::vector<double> signal;
    SignalKind kind = SignalKind::Direct;
    SpectrumMeta meta;
};

inline void validate_detunings(std::span<const double> d) {
    if (d.empty()) throw DomainError("detuning grid is empty");
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i])) throw DomainError("detuning grid contains a non-finite value");
        if (i > 0 && !(d[i] > d[i - 1])) throw DomainError("detunings must be strictly increasing");
    }
}

/// Detunings start, start + step, ... up to stop (inclusive within 1e-9 step).
inline std::vector<double> detuning_grid(double start, double stop, double step) {
    if (!(step > 0.0)) throw DomainError("delta_step must be > 0");
    if (!(stop >= start)) throw DomainError("delta_stop must be >= delta_start");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    out.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
}

/// Direct signal prefactor * Re[I_SR].
inline Spectrum sr_signal(std::span<const double> detunings, const TransitionParams& p,
                          const VelocityModel& model, const QuadratureConfig& quad,
                          const NormalizationInfo& norm) {
    validate_detunings(detunings);
    if (std::holds_alternative<InfiniteDoppler>(model))
        throw UnsupportedModel(
            "the infinite-Doppler model has no finite direct signal; use fmsr_small_modulation, "
            "the derivative of the direct signal");
    const auto pts = isr_points(detunings, p, model, quad, false);
    Spectrum s;
    s.detunings.assign(detunings.begin(), detunings.end());
    s.kind = SignalKind::Direct;
    s.meta = {p, model, quad, std::nullopt, norm, {}};
    for (const auto& pt : pts) {
        s.isr.push_back(pt.value);
        s.signal.push_back(norm.prefactor * pt.value.real());
    }
    return s;
}

/// Small-modulation FMSR, M * prefactor * Re[dI_SR/d delta], with the
/// derivative carried analytically through the quadrature.
inline Spectrum fmsr_small_modulation(std::span<const double> detunings, const TransitionParams& p,
                                      const VelocityModel& model, const QuadratureConfig& quad,
                                      const ModulationParams& mod, const NormalizationInfo& norm) {
    validate_detunings(detunings);
    validate(mod);
    const auto pts = isr_points(detunings, p, model, quad, true);
    const bool infinite = std::holds_alternative<InfiniteDoppler>(model);
    Spectrum s;
    s.detunings.assign(detunings.begin(), detunings.end());
    s.kind = infinite ? SignalKind::InfiniteDopplerDerivative : SignalKind::SmallModFMSR;
    s.meta = {p, model, quad, mod, norm, {}};
    for (const auto& pt : pts) {
        s.isr.push_back(infinite ? pt.derivative : pt.value);
        s.signal.push_back(mod.amplitude_mhz * norm.prefactor * pt.derivative.real());
    }
    return s;
}

inline constexpr double bessel_tail_threshold = 1e-12;

/// Smallest N_max with |J_N(x) J_{N-1}(x)| < threshold for every |N| > N_max.
inline int auto_bessel_order(double x) {
    // Beyond N > x the products fall monotonically.
    int n = std::max(1, static_cast<int>(std::ceil(std::abs(x))));
    while (std::abs(bessel_j(n + 1, x) * bessel_j(n, x)) >= bessel_tail_threshold) ++n;
    return n;
}

/// In-phase FM demodulation by the sideband sum
/// prefactor * Re sum_N [I(delta + N f) + I*(delta + (N-1) f)] J_N(M/f) J_{N-1}(M/f).
/// I_SR is evaluated once on the union of all shifted detunings.
inline Spectrum fmsr_bessel(std::span<const double> detunings, const TransitionParams& p,
                            const VelocityModel& model, const QuadratureConfig& quad,
                            const ModulationParams& mod, const NormalizationInfo& norm) {
    validate_detunings(detunings);
    validate(mod);
    if (std::holds_alternative<InfiniteDoppler>(model))
        throw UnsupportedModel(
            "the sideband sum needs I_SR itself, which diverges in the infinite-Doppler model");
    const double f = mod.f_fm_mhz;
    const double x = mod.amplitude_mhz / f;
    const int auto_n = auto_bessel_order(x);
    const int n_max = mod.n_max.value_or(auto_n);
    std::vector<std::string> warnings;
    if (mod.n_max && std::abs(bessel_j(n_max + 1, x) * bessel_j(n_max, x)) >= bessel_tail_threshold)
        warnings.push_back("bessel truncation: N_max = " + std::to_string(n_max) +
                           " leaves sideband terms above 1e-12; auto order is " +
                           std::to_string(auto_n));

    std::vector<double> j(static_cast<std::size_t>(2 * n_max + 3));
    for (int n = -n_max - 1; n <= n_max + 1; ++n)
        j[static_cast<std::size_t>(n + n_max + 1)] = bessel_j(n, x);
    auto J = [&](int n) { return j[static_cast<std::size_t>(n + n_max + 1)]; };

    // Sideband offsets m f for m in [-n_max - 1, n_max].
    const int m_lo = -n_max - 1;
    const int m_count = 2 * n_max + 2;
    std::vector<double> super;
    super.reserve(detunings.size() * static_cast<std::size_t>(m_count));
    for (double d : detunings)
        for (int m = 0; m < m_count; ++m) super.push_back(d + (m_lo + m) * f);
    std::vector<double> unique = super;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    const auto pts = x == 0.0 ? std::vector<IsrPoint>(unique.size())
                              : isr_points(unique, p, model, quad, false);
    auto lookup = [&](double d) {
        const auto it = std::lower_bound(unique.begin(), unique.end(), d);
        return pts[static_cast<std::size_t>(it - unique.begin())].value;
    };

    Spectrum s;
    s.detunings.assign(detunings.begin(), detunings.end());
    s.kind = SignalKind::BesselFMSR;
    s.meta = {p, model, quad, mod, norm, warnings};
    for (std::size_t i = 0; i < detunings.size(); ++i) {
        const double* row = &super[i * static_cast<std::size_t>(m_count)];
        cplx sum = 0.0;
        for (int n = -n_max; n <= n_max; ++n) {
            const double w = J(n) * J(n - 1);
            if (w == 0.0) continue;
            sum += (lookup(row[n - m_lo]) + std::conj(lookup(row[n - 1 - m_lo]))) * w;
        }
        s.isr.push_back(lookup(detunings[i]));
        s.signal.push_back(norm.prefactor * sum.real());
    }
    return s;
}

struct ConvergenceReport {
    cplx value_a;       // configured cutoff
    cplx value_b;       // the variant that moved furthest
    cplx value_zc;      // z_c doubled
    cplx value_kc;      // k_c halved
    double rel_zc = 0.0;
    double rel_kc = 0.0;
    double rel_delta = 0.0;
    bool pass = false;
};

/// Recomputes I_SR(delta_probe) (dI/d delta for the infinite-Doppler model)
/// with z_c doubled and with k_c halved; passes when both relative changes are
/// below convergence_tol. The z grid grows with the cutoff when z_max is automatic
/// or too short.
inline ConvergenceReport convergence_check(const TransitionParams& p, const VelocityModel& model,
                                           const QuadratureConfig& quad, double delta_probe) {
    const ResolvedQuadrature r = resolve(quad, p);
    const double d[1] = {delta_probe};
    const bool infinite = std::holds_alternative<InfiniteDoppler>(model);
    auto eval = [&](const QuadratureConfig& q) {
        const IsrPoint pt = isr_points(d, p, model, q, infinite).front();
        return infinite ? pt.derivative : pt.value;
    };
    auto variant = [&](double zc, double kc) {
        QuadratureConfig q = quad;
        q.z_c_um = zc;
        q.k_c_per_um = kc;
        q.z_max_um = quad.z_max_um > 0.0 ? std::max(quad.z_max_um, zc + 10.0 / kc) : 0.0;
        return q;
    };
    ConvergenceReport rep;
    rep.value_a = eval(quad);
    rep.value_zc = eval(variant(2.0 * r.z_c_um, r.k_c_per_um));
    rep.value_kc = eval(variant(r.z_c_um, 0.5 * r.k_c_per_um));
    const double scale = std::abs(rep.value_a);
    rep.rel_zc = std::abs(rep.value_zc - rep.value_a) / scale;
    rep.rel_kc = std::abs(rep.value_kc - rep.value_a) / scale;
    rep.value_b = rep.rel_zc >= rep.rel_kc ? rep.value_zc : rep.value_kc;
    rep.rel_delta = std::max(rep.rel_zc, rep.rel_kc);
    rep.pass = rep.rel_delta < r.convergence_tol;
    return rep;
}

}  // namespace srcp
