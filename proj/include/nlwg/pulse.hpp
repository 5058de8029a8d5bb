#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nlwg/constants.hpp"
#include "nlwg/grid.hpp"

namespace nlwg {

enum class PulseShape { Sech2 };

/// Pulsed-laser parameters. Photon energy is derived from the centre
/// wavelength; the sech^2 width T0 relates to the FWHM through
/// fwhm = 2 acosh(sqrt(2)) T0.
struct LaserSpec {
  double fwhm;        // intensity FWHM [s]
  double rep_rate;    // repetition rate [Hz]
  double wavelength;  // centre wavelength [m]
  PulseShape shape = PulseShape::Sech2;

  LaserSpec(double fwhm_s, double rep_rate_hz, double wavelength_m,
            PulseShape pulse_shape = PulseShape::Sech2)
      : fwhm(fwhm_s), rep_rate(rep_rate_hz), wavelength(wavelength_m), shape(pulse_shape) {
    if (!(fwhm > 0.0) || !(rep_rate > 0.0) || !(wavelength > 0.0))
      throw std::invalid_argument("LaserSpec: fwhm, rep_rate and wavelength must be positive");
  }

  /// Characteristic sech width T0 [s].
  double sech_width() const { return fwhm / (2.0 * std::acosh(std::sqrt(2.0))); }

  double photon_energy_j() const {
    return constants::planck_constant * constants::speed_of_light / wavelength;
  }

  double wavenumber() const { return 2.0 * std::numbers::pi / wavelength; }
};

/// Sampled optical power and phase on a temporal grid. Power must be
/// non-negative and finite everywhere. Spectral operations additionally
/// require the power to decay below 1e-6 of its peak at the window edges;
/// that is checked where it matters (pulse construction, spectra) rather than
/// here, since solver tests legitimately use rectangular envelopes.
struct PulseEnvelope {
  TemporalGrid grid;
  std::vector<double> power;  // [W]
  std::vector<double> phase;  // [rad]

  PulseEnvelope(TemporalGrid g, std::vector<double> p, std::vector<double> ph)
      : grid(g), power(std::move(p)), phase(std::move(ph)) {
    const auto n = static_cast<std::size_t>(grid.n_samples());
    if (power.size() != n || phase.size() != n)
      throw std::invalid_argument("PulseEnvelope: sequence length must equal n_samples");
    for (double v : power)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("PulseEnvelope: power must be finite and non-negative");
    for (double v : phase)
      if (!std::isfinite(v)) throw std::invalid_argument("PulseEnvelope: phase must be finite");
  }

  static PulseEnvelope zero(const TemporalGrid& g) {
    std::vector<double> z(static_cast<std::size_t>(g.n_samples()), 0.0);
    return PulseEnvelope(g, z, z);
  }

  int peak_index() const {
    return static_cast<int>(std::max_element(power.begin(), power.end()) - power.begin());
  }

  double peak_power() const { return *std::max_element(power.begin(), power.end()); }

  /// True when the power has decayed below `tol` x peak at both window edges.
  bool edge_decay_ok(double tol = 1e-6) const {
    const double pk = peak_power();
    if (pk == 0.0) return true;
    return power.front() < tol * pk && power.back() < tol * pk;
  }
};

/// sech^2 pulse: P(tau) = peak_power sech^2((tau - center)/T0) with zero phase.
/// Requires the window to span at least 8x the FWHM and the envelope to decay
/// below 1e-6 of the peak at both edges.
inline PulseEnvelope sech2_pulse(const TemporalGrid& grid, double peak_power, double fwhm,
                                 double center = 0.0) {
  if (!(fwhm > 0.0)) throw std::invalid_argument("sech2_pulse: fwhm must be positive");
  if (!(peak_power >= 0.0) || !std::isfinite(peak_power))
    throw std::invalid_argument("sech2_pulse: peak power must be finite and non-negative");
  if (grid.window() < 8.0 * fwhm)
    throw std::invalid_argument("sech2_pulse: window must span at least 8x the pulse FWHM");

  const double t0 = fwhm / (2.0 * std::acosh(std::sqrt(2.0)));
  const auto n = static_cast<std::size_t>(grid.n_samples());
  std::vector<double> power(n), phase(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (grid.time(static_cast<int>(i)) - center) / t0;
    const double s = 1.0 / std::cosh(x);
    power[i] = peak_power * s * s;
  }
  PulseEnvelope env(grid, std::move(power), std::move(phase));
  if (peak_power > 0.0 && !env.edge_decay_ok())
    throw std::invalid_argument(
        "sech2_pulse: window too small, envelope does not decay below 1e-6 of peak at edges");
  return env;
}

/// Peak power of a sech^2 pulse with the given time-averaged power:
/// pulse energy avg/rep_rate spread over the envelope integral 2 T0.
inline double peak_from_average(double avg_power, const LaserSpec& laser) {
  if (!(avg_power >= 0.0)) throw std::invalid_argument("peak_from_average: negative average power");
  return avg_power / (laser.rep_rate * 2.0 * laser.sech_width());
}

inline double average_from_peak(double peak_power, const LaserSpec& laser) {
  if (!(peak_power >= 0.0)) throw std::invalid_argument("average_from_peak: negative peak power");
  return peak_power * laser.rep_rate * 2.0 * laser.sech_width();
}

/// Trapezoidal pulse energy [J].
inline double pulse_energy(const PulseEnvelope& pulse) {
  const auto& p = pulse.power;
  double sum = 0.0;
  for (double v : p) sum += v;
  sum -= 0.5 * (p.front() + p.back());
  return sum * pulse.grid.dt();
}

}  // namespace nlwg
