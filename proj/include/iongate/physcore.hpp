#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "iongate/constants.hpp"
#include "iongate/errors.hpp"

namespace iongate {

// Flat key -> textual value map, as read from a config file or --set flags.
using ConfigMap = std::map<std::string, std::string>;

// Ion species, trap and laser constants. Frequencies are angular (rad/s);
// the Doppler temperature is stored as k_B T / hbar (rad/s).
struct PhysicalParams {
  double ion_mass = 171.0 * constants::atomic_mass_unit;
  double coulomb_coupling = constants::coulomb_coupling_e2;
  double omega_x = constants::two_pi * 5.0e6;
  double omega_y = constants::two_pi * 5.0e6;
  double doppler_temperature = constants::two_pi * 1.0e7;
  double effective_wavevector = 1.56e7;
  double beam_waist = 4.0e-6;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(std::isfinite(v) && v > 0.0)) {
        throw ConfigError(std::string(name) + " must be finite and strictly positive");
      }
    };
    positive(ion_mass, "ion_mass");
    positive(coulomb_coupling, "coulomb_coupling");
    positive(omega_x, "omega_x");
    positive(omega_y, "omega_y");
    positive(doppler_temperature, "doppler_temperature");
    positive(effective_wavevector, "effective_wavevector");
    positive(beam_waist, "beam_waist");
  }
};

enum class PotentialKind { harmonic, quartic };

// V(z) = alpha2 z^2 / 2 + alpha4 z^4 / 4 in SI units (J/m^2, J/m^4).
struct AxialPotential {
  PotentialKind kind = PotentialKind::quartic;
  double alpha2 = 0.0;
  double alpha4 = 0.0;

  static AxialPotential harmonic(double alpha2) {
    if (!(std::isfinite(alpha2) && alpha2 > 0.0)) {
      throw ConfigError("harmonic potential needs alpha2 > 0");
    }
    return {PotentialKind::harmonic, alpha2, 0.0};
  }

  static AxialPotential harmonic_from_frequency(double omega_z, const PhysicalParams& params) {
    return harmonic(params.ion_mass * omega_z * omega_z);
  }

  static AxialPotential quartic(double alpha2, double alpha4) {
    if (!std::isfinite(alpha2)) throw ConfigError("alpha2 must be finite");
    if (!(std::isfinite(alpha4) && alpha4 > 0.0)) {
      throw ConfigError("quartic potential needs alpha4 > 0");
    }
    return {PotentialKind::quartic, alpha2, alpha4};
  }

  double value(double z) const { return 0.5 * alpha2 * z * z + 0.25 * alpha4 * z * z * z * z; }
  double derivative(double z) const { return alpha2 * z + alpha4 * z * z * z; }
  double curvature(double z) const { return alpha2 + 3.0 * alpha4 * z * z; }
};

// Natural units of a trapped chain: lengths in l, energies in e^2/l and
// frequencies in sqrt(e^2 / (m l^3)).
struct UnitSystem {
  double length = 1.0;
  double energy = 1.0;
  double frequency = 1.0;

  static UnitSystem from_length(double length, const PhysicalParams& params) {
    UnitSystem u;
    u.length = length;
    u.energy = params.coulomb_coupling / length;
    u.frequency = std::sqrt(u.energy / (params.ion_mass * length * length));
    return u;
  }

  // l = (e^2/alpha4)^(1/5) for quartic, (e^2/(m omega_z^2))^(1/3) for harmonic.
  static UnitSystem for_potential(const AxialPotential& pot, const PhysicalParams& params) {
    const double e2 = params.coulomb_coupling;
    const double l = pot.kind == PotentialKind::quartic ? std::pow(e2 / pot.alpha4, 0.2)
                                                        : std::cbrt(e2 / pot.alpha2);
    return from_length(l, params);
  }

  double to_dimensionless_length(double x) const { return x / length; }
  double to_physical_length(double u) const { return u * length; }
  double to_dimensionless_energy(double x) const { return x / energy; }
  double to_physical_energy(double u) const { return u * energy; }
  double to_dimensionless_frequency(double x) const { return x / frequency; }
  double to_physical_frequency(double u) const { return u * frequency; }
};

// Coefficients (c2, c4) of the dimensionless potential c2 u^2/2 + c4 u^4/4.
struct DimensionlessPotential {
  double quadratic = 0.0;
  double quartic = 0.0;

  static DimensionlessPotential of(const AxialPotential& pot, const UnitSystem& units) {
    const double l2 = units.length * units.length;
    return {pot.alpha2 * l2 / units.energy, pot.alpha4 * l2 * l2 / units.energy};
  }

  double derivative(double u) const { return quadratic * u + quartic * u * u * u; }
  double curvature(double u) const { return quadratic + 3.0 * quartic * u * u; }
  double value(double u) const { return 0.5 * quadratic * u * u + 0.25 * quartic * u * u * u * u; }
};

// B = sign(alpha2) |alpha2/e^2|^(2/3) |alpha2/alpha4|.
inline double b_parameter(const AxialPotential& pot, const PhysicalParams& params) {
  if (pot.kind != PotentialKind::quartic) {
    throw ConfigError("B is only defined for the quartic potential");
  }
  const double ratio = std::abs(pot.alpha2 / params.coulomb_coupling);
  return std::pow(ratio, 2.0 / 3.0) * (pot.alpha2 / pot.alpha4);
}

// Inverse of b_parameter at fixed unit length l = (e^2/alpha4)^(1/5).
inline AxialPotential potential_from_b(double b, double length_scale, const PhysicalParams& params) {
  if (!(std::isfinite(length_scale) && length_scale > 0.0)) {
    throw ConfigError("length scale must be strictly positive");
  }
  if (!std::isfinite(b)) throw ConfigError("B must be finite");
  const double e2 = params.coulomb_coupling;
  const double l3 = length_scale * length_scale * length_scale;
  const double alpha4 = e2 / (l3 * length_scale * length_scale);
  const double c2 = std::copysign(std::pow(std::abs(b), 0.6), b);
  return AxialPotential::quartic(c2 * e2 / l3, alpha4);
}

namespace detail {

inline double parse_number(std::string_view key, std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("value for '" + std::string(key) + "' is not a number: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace detail

inline const std::set<std::string>& physical_param_keys() {
  static const std::set<std::string> keys{"mass_amu",      "omega_x_hz",       "omega_y_hz",
                                          "temperature_k", "temperature_hz",   "wavevector_per_m",
                                          "waist_m"};
  return keys;
}

// Builds validated parameters from a flat map. temperature_k (kelvin) and
// temperature_hz (k_B T / h in Hz) are mutually exclusive.
inline PhysicalParams make_params(const ConfigMap& config) {
  for (const auto& [key, value] : config) {
    if (!physical_param_keys().contains(key)) {
      throw ConfigError("unknown parameter key '" + key + "'");
    }
  }
  auto get = [&](const std::string& key, double fallback) {
    auto it = config.find(key);
    const double v = it == config.end() ? fallback : detail::parse_number(key, it->second);
    if (!(std::isfinite(v) && v > 0.0)) {
      throw ConfigError("'" + key + "' must be finite and strictly positive");
    }
    return v;
  };

  PhysicalParams p;
  p.ion_mass = get("mass_amu", 171.0) * constants::atomic_mass_unit;
  p.omega_x = constants::two_pi * get("omega_x_hz", 5.0e6);
  p.omega_y = constants::two_pi * get("omega_y_hz", 5.0e6);
  if (config.contains("temperature_k") && config.contains("temperature_hz")) {
    throw ConfigError("temperature_k and temperature_hz are mutually exclusive");
  }
  if (config.contains("temperature_k")) {
    p.doppler_temperature = constants::boltzmann * get("temperature_k", 1.0) / constants::hbar;
  } else {
    p.doppler_temperature = constants::two_pi * get("temperature_hz", 1.0e7);
  }
  p.effective_wavevector = get("wavevector_per_m", 1.56e7);
  p.beam_waist = get("waist_m", 4.0e-6);
  p.validate();
  return p;
}

}  // namespace iongate
