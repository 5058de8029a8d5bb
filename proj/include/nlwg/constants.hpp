#pragma once

#include <cmath>
#include <stdexcept>

namespace nlwg {
namespace constants {

// Fixed CODATA-style values so that every derived quantity in the library is
// reproducible bit-for-bit across builds.
inline constexpr double k_boltzmann_ev = 8.617333e-5;        // Boltzmann constant [eV/K]
inline constexpr double electron_charge = 1.602177e-19;      // elementary charge [C]
inline constexpr double vacuum_permittivity = 8.854188e-12;  // [F/m]
inline constexpr double free_electron_mass = 9.109384e-31;   // [kg]
inline constexpr double speed_of_light = 2.997925e8;         // [m/s]
inline constexpr double planck_constant = 6.62607015e-34;    // [J s]
inline constexpr double joules_per_ev = electron_charge;     // [J/eV]

}  // namespace constants

// Unit conversions live at the I/O boundary; everything internal is SI.
namespace units {

inline constexpr double mw = 1e-3;   // milliwatt [W]
inline constexpr double ps = 1e-12;  // picosecond [s]
inline constexpr double ns = 1e-9;   // nanosecond [s]
inline constexpr double nm = 1e-9;   // nanometre [m]
inline constexpr double um = 1e-6;   // micrometre [m]
inline constexpr double mm = 1e-3;   // millimetre [m]
inline constexpr double mhz = 1e6;   // megahertz [Hz]

// 1 cm/GW = 1e-11 m/W (TPA coefficient).
inline constexpr double cm_per_gw = 1e-11;
// 1 nm^2/W = 1e-18 m^2/W (Kerr coefficient).
inline constexpr double nm2_per_w = 1e-18;

/// Propagation loss quoted in dB/cm -> power loss coefficient [1/m].
inline double loss_db_per_cm_to_per_m(double db_per_cm) {
  if (!(db_per_cm >= 0.0)) throw std::invalid_argument("loss in dB/cm must be non-negative");
  return db_per_cm * std::log(10.0) / 10.0 * 100.0;
}

inline double loss_per_m_to_db_per_cm(double per_m) {
  return per_m * 10.0 / std::log(10.0) / 100.0;
}

inline double db_to_transmittance(double db) { return std::pow(10.0, -db / 10.0); }

inline double transmittance_to_db(double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("transmittance must be positive");
  return -10.0 * std::log10(eta);
}

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

inline double tpa_cm_per_gw_to_m_per_w(double v) { return v * cm_per_gw; }
inline double tpa_m_per_w_to_cm_per_gw(double v) { return v / cm_per_gw; }

}  // namespace units
}  // namespace nlwg
