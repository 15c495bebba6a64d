#pragma once

#include <cmath>
#include <complex>

#include "errors.hpp"
#include "params.hpp"
#include "units.hpp"

namespace srcp {

/// sqrt(2 k_B T / m), in m/s.
inline double most_probable_velocity(double temperature_k, double mass_amu) {
    if (!(mass_amu > 0.0)) throw DomainError("most_probable_velocity: mass must be > 0");
    if (!(temperature_k >= 0.0)) throw DomainError("most_probable_velocity: temperature must be >= 0");
    return std::sqrt(2.0 * units::boltzmann_j_per_k * temperature_k /
                     (mass_amu * units::atomic_mass_kg));
}

/// One-dimensional Maxwell-Boltzmann density along z, normalised over the real line.
inline double mb_weight(double v_m_s, double v_p_m_s) {
    if (!(v_p_m_s > 0.0)) throw DomainError("mb_weight: v_p must be > 0");
    const double u = v_m_s / v_p_m_s;
    return std::exp(-u * u) / (v_p_m_s * std::sqrt(units::pi));
}

/// Antiderivative of the surface potential, Q(z) = c3/(2 z^2) + c5/(4 z^4), so that
/// integral_z^z' (c3/xi^3 + c5/xi^5) dxi = Q(z) - Q(z').
inline std::complex<double> potential_antiderivative(double z_um, std::complex<double> c3,
                                                     double c5) {
    const double inv2 = 1.0 / (z_um * z_um);
    return 0.5 * c3 * inv2 + 0.25 * c5 * inv2 * inv2;
}

/// integral_z^{z'} (c3/xi^3 + c5/xi^5) dxi in MHz um.
inline std::complex<double> potential_phase_integral(double z_um, double z_prime_um,
                                                     std::complex<double> c3, double c5) {
    if (!(z_um > 0.0) || !(z_prime_um > 0.0))
        throw SingularityError("potential_phase_integral: z and z' must be > 0");
    if (z_um == z_prime_um) return {0.0, 0.0};
    const double a2 = 1.0 / (z_um * z_um);
    const double b2 = 1.0 / (z_prime_um * z_prime_um);
    return 0.5 * c3 * (a2 - b2) + 0.25 * c5 * (a2 * a2 - b2 * b2);
}

/// Bessel function of the first kind for integer order and any real argument.
inline double bessel_j(int order, double x) {
    const bool odd = (order % 2) != 0;
    double sign = 1.0;
    if (order < 0) {
        order = -order;
        if (odd) sign = -sign;
    }
    if (x < 0.0) {
        x = -x;
        if (odd) sign = -sign;
    }
    if (x == 0.0) return order == 0 ? 1.0 : 0.0;
    return sign * std::cyl_bessel_j(static_cast<double>(order), x);
}

/// (1 + exp(-k_c (z_c - z)))^-1: ~1 near the window, 1/2 at z_c, -> 0 deep in the vapor.
inline double logistic_cutoff(double z_um, double z_c_um, double k_c_per_um) {
    return 1.0 / (1.0 + std::exp(-k_c_per_um * (z_c_um - z_um)));
}

/// Thermal photon occupation 1/(exp(h nu / k_B T) - 1).
inline double bose_occupation(double frequency_thz, double temperature_k) {
    if (!(temperature_k > 0.0)) throw DomainError("bose_occupation: temperature must be > 0");
    const double x = units::planck_j_s * frequency_thz * units::thz_to_hz /
                     (units::boltzmann_j_per_k * temperature_k);
    return 1.0 / std::expm1(x);
}

/// Image-coefficient factor Im[(eps - 1)/(eps + 1)].
inline double image_coefficient_imag(std::complex<double> epsilon) {
    if (epsilon == std::complex<double>(-1.0, 0.0))
        throw SingularityError("surface response: epsilon = -1 is the surface-polariton pole");
    return std::imag((epsilon - 1.0) / (epsilon + 1.0));
}

/// C3^im = 2 mu_ea Im[(eps-1)/(eps+1)] / (exp(h nu / k_B T) - 1).
///
/// mu_ea is used as given; its conversion to MHz um^3 is the caller's business.
inline double c3_imaginary(const SurfaceResponse& resp) {
    if (!(resp.temperature_k > 0.0)) throw DomainError("c3_imaginary: temperature must be > 0");
    if (!(resp.frequency_thz > 0.0)) throw DomainError("c3_imaginary: frequency must be > 0");
    return 2.0 * resp.mu_ea * image_coefficient_imag(resp.epsilon) *
           bose_occupation(resp.frequency_thz, resp.temperature_k);
}

}  // namespace srcp
