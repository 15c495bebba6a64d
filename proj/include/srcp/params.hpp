#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <variant>

#include "errors.hpp"
#include "units.hpp"

namespace srcp {

/// Optical transition plus atom-surface constants.
///
/// The distance-dependent linewidth enters as the imaginary part of C3: the
/// local complex detuning is Gamma/2 - i(delta + (c3 + i c3_imag)/z^3), i.e.
/// Gamma_tilde(z) = Gamma + 2 c3_imag / z^3.
struct TransitionParams {
    double lambda_um = 0.0;
    double gamma_mhz = 0.0;
    double c3_mhz_um3 = 0.0;
    double c3_imag_mhz_um3 = 0.0;
    double c5_mhz_um5 = 0.0;
    double window_index = 1.76;
    std::optional<double> dipole_cm;   // SI, C*m
    std::optional<double> density_m3;  // atoms per m^3

    double k_per_um() const { return units::two_pi / lambda_um; }
    std::complex<double> c3() const { return {c3_mhz_um3, c3_imag_mhz_um3}; }
};

inline void validate(const TransitionParams& p) {
    auto fail = [](const std::string& msg) { throw DomainError("TransitionParams: " + msg); };
    if (!(p.lambda_um > 0.0)) fail("lambda_um must be > 0");
    if (!(p.gamma_mhz > 0.0)) fail("gamma_mhz must be > 0");
    if (!(p.window_index > 1.0)) fail("window_index must be > 1");
    if (!(p.c5_mhz_um5 >= 0.0)) fail("c5_mhz_um5 must be >= 0");
    if (!(p.c3_imag_mhz_um3 >= 0.0)) fail("c3_imag_mhz_um3 must be >= 0");
    if (!std::isfinite(p.c3_mhz_um3)) fail("c3_mhz_um3 must be finite");
    if (p.density_m3 && !(*p.density_m3 >= 0.0)) fail("density_m3 must be >= 0");
}

struct MaxwellBoltzmann {
    double temperature_k = 500.0;
    double mass_amu = units::cesium_mass_amu;
};

/// Flat velocity distribution. The plateau value is 1/(plateau_speed sqrt(pi));
/// only derivatives with respect to detuning are finite in this model.
struct InfiniteDoppler {
    double plateau_speed_m_s = 1.0;
};

struct Motionless {};

using VelocityModel = std::variant<MaxwellBoltzmann, InfiniteDoppler, Motionless>;

inline void validate(const VelocityModel& m) {
    if (const auto* mb = std::get_if<MaxwellBoltzmann>(&m)) {
        if (!(mb->temperature_k > 0.0))
            throw DomainError("MaxwellBoltzmann: temperature_k must be > 0");
        if (!(mb->mass_amu > 0.0)) throw DomainError("MaxwellBoltzmann: mass_amu must be > 0");
    } else if (const auto* inf = std::get_if<InfiniteDoppler>(&m)) {
        if (!(inf->plateau_speed_m_s > 0.0))
            throw DomainError("InfiniteDoppler: plateau_speed_m_s must be > 0");
    }
}

inline std::string model_name(const VelocityModel& m) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, MaxwellBoltzmann>) return "maxwell_boltzmann";
            else if constexpr (std::is_same_v<T, InfiniteDoppler>) return "infinite_doppler";
            else return "motionless";
        },
        m);
}

/// Laser frequency modulation f + M cos(2 pi f_fm t).
struct ModulationParams {
    double amplitude_mhz = 0.0;
    double f_fm_mhz = 1.0;
    std::optional<int> n_max;  // empty: chosen from the Bessel tail
};

inline void validate(const ModulationParams& m) {
    if (!(m.amplitude_mhz >= 0.0)) throw DomainError("ModulationParams: amplitude_mhz must be >= 0");
    if (!(m.f_fm_mhz > 0.0)) throw DomainError("ModulationParams: f_fm_mhz must be > 0");
    if (m.n_max && *m.n_max < 1) throw DomainError("ModulationParams: n_max must be >= 1");
}

/// Dielectric response at a coupling transition e -> a that can resonate with
/// surface polaritons. `frequency_thz` is the linear frequency, so the Bose
/// factor uses h * nu. `mu_ea` is taken in C3-compatible units (MHz um^3).
struct SurfaceResponse {
    std::complex<double> epsilon{1.0, 0.0};
    double frequency_thz = 0.0;
    double mu_ea = 0.0;
    double temperature_k = 0.0;
};

}  // namespace srcp
