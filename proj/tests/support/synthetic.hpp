#pragma once

// Forward-simulation helpers shared by the fitting tests and the acceptance
// suite: generate fibre-to-fibre power scans from ground-truth waveguide and
// coupler parameters.

#include <random>
#include <utility>
#include <vector>

#include "nlwg/fitting.hpp"
#include "nlwg/propagation.hpp"
#include "nlwg/pulse.hpp"

namespace nlwg_test {

struct GroundTruth {
  nlwg::NonlinearCoeffs nl;
  double eta_l;    // input coupler of the Off orientation
  double eta_r;
  double eta_x;    // cross-over switch excess transmittance (On state)
};

inline std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, double(i) / (n - 1));
  return v;
}

/// Fibre-to-fibre samples (p_in, p_out) for one direction. Noise is
/// multiplicative on the output power, lognormal-free (1 + eps) with fixed
/// seed when noise_rms > 0.
inline std::vector<std::pair<double, double>> synth_scan_samples(
    nlwg::Direction dir, const std::vector<double>& p_in_w, const GroundTruth& truth,
    const nlwg::TemporalGrid& grid, const nlwg::LaserSpec& laser, const nlwg::WaveguideSpec& wg,
    const nlwg::SolverConfig& cfg, double noise_rms = 0.0, unsigned seed = 1234) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::pair<double, double>> samples;
  samples.reserve(p_in_w.size());
  const bool on = dir == nlwg::Direction::On;
  const double eta_in = on ? truth.eta_r : truth.eta_l;
  const double eta_out = on ? truth.eta_l : truth.eta_r;
  const double chain_in = eta_in * (on ? std::sqrt(truth.eta_x) : 1.0);
  const double chain_out = eta_out * (on ? std::sqrt(truth.eta_x) : 1.0);
  for (double p : p_in_w) {
    const double peak = nlwg::peak_from_average(chain_in * p, laser);
    const auto pulse = nlwg::sech2_pulse(grid, peak, laser.fwhm);
    const auto res = nlwg::propagate(pulse, laser, wg, truth.nl, cfg);
    double p_out = p * chain_in * chain_out * res.transmission;
    if (noise_rms > 0.0) p_out *= 1.0 + noise_rms * noise(rng);
    samples.emplace_back(p, p_out);
  }
  return samples;
}

}  // namespace nlwg_test
