#pragma once

#include <numbers>

// CODATA 2018 values, SI units.
namespace iongate::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double boltzmann = 1.380649e-23;            // J / K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double coulomb_constant = 8.9875517923e9;     // N m^2 / C^2

// Gaussian-convention e^2 for a singly charged ion, J m.
inline constexpr double coulomb_coupling_e2 =
    coulomb_constant * elementary_charge * elementary_charge;

inline constexpr double zeta3 = 1.2020569031595943;

}  // namespace iongate::constants
