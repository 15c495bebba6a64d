#pragma once

// Internal unit system: lengths in um, frequencies in MHz, velocities in m/s,
// temperatures in K, masses in amu. A velocity in m/s divided by a length in
// um is a frequency in MHz, so the coherence exponent is dimensionless with no
// conversion constants.

#include <numbers>

namespace srcp::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018
inline constexpr double boltzmann_j_per_k = 1.380649e-23;
inline constexpr double atomic_mass_kg = 1.66053906660e-27;
inline constexpr double hbar_j_s = 1.054571817e-34;
inline constexpr double planck_j_s = 6.62607015e-34;
inline constexpr double epsilon0_f_per_m = 8.8541878128e-12;

inline constexpr double um_to_m = 1e-6;
inline constexpr double mhz_to_hz = 1e6;
inline constexpr double thz_to_hz = 1e12;

/// One internal I_SR unit (um * us) expressed in SI (m * s).
inline constexpr double isr_to_si = 1e-12;

inline constexpr double cesium_mass_amu = 132.905451931;

}  // namespace srcp::units
