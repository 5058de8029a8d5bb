#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nlwg/constants.hpp"
#include "nlwg/errors.hpp"
#include "nlwg/fft.hpp"
#include "nlwg/grid.hpp"
#include "nlwg/pulse.hpp"

namespace nlwg {

/// One measured optical spectrum: ascending wavelengths with a non-negative
/// linear-scale spectral density. resolution_bw records the analyser
/// resolution bandwidth for provenance; it does not enter the computation.
struct SpectrumRecord {
  std::vector<double> wavelengths;  // [m], strictly increasing
  std::vector<double> psd;          // linear scale, arbitrary units
  double resolution_bw = 0.0;       // [m]

  SpectrumRecord(std::vector<double> wl, std::vector<double> density, double rbw = 0.0)
      : wavelengths(std::move(wl)), psd(std::move(density)), resolution_bw(rbw) {
    if (wavelengths.size() != psd.size() || wavelengths.empty())
      throw std::invalid_argument("SpectrumRecord: wavelengths and psd must match and be non-empty");
    for (std::size_t i = 0; i < wavelengths.size(); ++i) {
      if (!(psd[i] >= 0.0)) throw std::invalid_argument("SpectrumRecord: psd must be non-negative");
      if (i > 0 && !(wavelengths[i] > wavelengths[i - 1]))
        throw std::invalid_argument("SpectrumRecord: wavelengths must be strictly increasing");
    }
  }
};

enum class InitPhase { Zero, Quadratic };

struct RetrievalConfig {
  int max_iters = 500;
  double err_tol = 1e-6;  // normalized spectral-magnitude RMS error
  InitPhase init_phase = InitPhase::Zero;
  double quadratic_curvature = 0.0;  // [rad/s^2], used with InitPhase::Quadratic

  RetrievalConfig() = default;
  RetrievalConfig(int iters, double tol, InitPhase init = InitPhase::Zero, double curv = 0.0)
      : max_iters(iters), err_tol(tol), init_phase(init), quadratic_curvature(curv) {
    if (max_iters < 1) throw std::invalid_argument("RetrievalConfig: max_iters must be >= 1");
    if (!(err_tol > 0.0)) throw std::invalid_argument("RetrievalConfig: err_tol must be positive");
  }
};

struct RetrievedPhase {
  TemporalGrid grid;
  std::vector<double> phase;  // [rad], zero at the temporal-magnitude peak
  double final_error = 0.0;
  int iterations_used = 0;
  bool converged = false;
  std::vector<double> error_history;
};

/// Resamples a wavelength-domain spectrum onto the conjugate frequency bins of
/// a temporal grid: wavelength -> angular frequency offset from the centre,
/// monotone linear interpolation onto the uniform bins (FFT ordering), square
/// root to magnitude, normalised to unit total energy. Throws aliasing_error
/// when any sample with non-zero psd lies outside the Nyquist band.
inline std::vector<double> resample_spectrum(const SpectrumRecord& spectrum,
                                             const TemporalGrid& grid, double center_wavelength) {
  if (!(center_wavelength > 0.0))
    throw std::invalid_argument("resample_spectrum: centre wavelength must be positive");
  const std::size_t m = spectrum.wavelengths.size();
  // Ascending wavelength maps to descending frequency offset; reverse so the
  // interpolation axis is ascending in omega.
  std::vector<double> omega(m), density(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t r = m - 1 - j;
    omega[j] = 2.0 * std::numbers::pi * constants::speed_of_light *
               (1.0 / spectrum.wavelengths[r] - 1.0 / center_wavelength);
    density[j] = spectrum.psd[r];
  }
  const double nyq = grid.nyquist_angular_frequency();
  for (std::size_t j = 0; j < m; ++j)
    if (density[j] > 0.0 && std::abs(omega[j]) > nyq)
      throw aliasing_error("resample_spectrum: spectrum support exceeds the Nyquist band");

  const int n = grid.n_samples();
  std::vector<double> mag(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const double w = grid.angular_frequency(k);
    if (w < omega.front() || w > omega.back()) continue;
    const auto hi = std::lower_bound(omega.begin(), omega.end(), w);
    double value;
    if (hi == omega.begin()) {
      value = density.front();
    } else {
      const auto i1 = static_cast<std::size_t>(hi - omega.begin());
      const std::size_t i0 = i1 - 1;
      if (i1 == m) {
        value = density.back();
      } else {
        const double f = (w - omega[i0]) / (omega[i1] - omega[i0]);
        value = density[i0] + f * (density[i1] - density[i0]);
      }
    }
    const double a = std::sqrt(std::max(value, 0.0));
    mag[static_cast<std::size_t>(k)] = a;
    total += a * a;
  }
  if (!(total > 0.0)) throw std::invalid_argument("resample_spectrum: spectrum carries no energy");
  const double scale = 1.0 / std::sqrt(total);
  for (auto& v : mag) v *= scale;
  return mag;
}

namespace detail {

/// 1-D phase unwrap outward from `anchor`, removing 2 pi jumps between
/// neighbouring samples.
inline void unwrap_phase_from(std::vector<double>& phase, std::size_t anchor) {
  constexpr double pi = std::numbers::pi;
  auto adjust = [&](double prev, double raw) {
    double d = raw - prev;
    d -= 2.0 * pi * std::round(d / (2.0 * pi));
    return prev + d;
  };
  for (std::size_t i = anchor + 1; i < phase.size(); ++i) phase[i] = adjust(phase[i - 1], phase[i]);
  for (std::size_t i = anchor; i-- > 0;) phase[i] = adjust(phase[i + 1], phase[i]);
}

}  // namespace detail

/// Gerchberg-Saxton error reduction between a temporal magnitude and a
/// spectral magnitude on conjugate grids. Both inputs must be normalised to
/// equal total energy. The per-iteration error is the RMS difference between
/// the achieved and target spectral magnitudes over the target norm; it is
/// non-increasing for this projection pair. The returned phase is unwrapped
/// and offset so it is exactly zero at the temporal-magnitude peak.
/// Non-convergence is reported through `converged`, not an error.
inline RetrievedPhase gerchberg_saxton(const TemporalGrid& grid,
                                       const std::vector<double>& spec_mag,
                                       const std::vector<double>& time_mag,
                                       const RetrievalConfig& cfg) {
  const auto n = static_cast<std::size_t>(grid.n_samples());
  if (spec_mag.size() != n || time_mag.size() != n)
    throw std::invalid_argument("gerchberg_saxton: magnitude lengths must equal n_samples");
  double e_time = 0.0, e_spec = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e_time += time_mag[i] * time_mag[i];
    e_spec += spec_mag[i] * spec_mag[i];
  }
  if (!(e_time > 0.0) || !(e_spec > 0.0))
    throw std::invalid_argument("gerchberg_saxton: magnitudes must carry energy");
  if (std::abs(e_time - e_spec) > 1e-6 * std::max(e_time, e_spec))
    throw std::invalid_argument("gerchberg_saxton: magnitudes must be normalised to equal energy");

  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(time_mag.begin(), time_mag.end()) - time_mag.begin());

  std::vector<double> phase(n, 0.0);
  if (cfg.init_phase == InitPhase::Quadratic) {
    for (std::size_t i = 0; i < n; ++i) {
      const double dt_pk = grid.time(static_cast<int>(i)) - grid.time(static_cast<int>(peak));
      phase[i] = cfg.quadratic_curvature * dt_pk * dt_pk;
    }
  }

  const double spec_norm = std::sqrt(e_spec);
  const double unitary = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<std::complex<double>> field(n);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.max_iters));
  double err = 0.0;
  int iters = 0;
  bool converged = false;

  for (int it = 0; it < cfg.max_iters; ++it) {
    // Impose the temporal magnitude, keep the current phase.
    for (std::size_t i = 0; i < n; ++i) field[i] = std::polar(time_mag[i], phase[i]);
    fft_inplace(field, false);
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double achieved = std::abs(field[k]) * unitary;
      const double d = achieved - spec_mag[k];
      ss += d * d;
    }
    err = std::sqrt(ss) / spec_norm;
    history.push_back(err);
    ++iters;

    // Impose the spectral magnitude, keep the spectral phase, return.
    for (std::size_t k = 0; k < n; ++k) {
      const double a = std::abs(field[k]);
      field[k] = a > 0.0 ? field[k] * (spec_mag[k] / (a * unitary))
                         : std::complex<double>(spec_mag[k] / unitary, 0.0);
    }
    fft_inplace(field, true);
    for (std::size_t i = 0; i < n; ++i) phase[i] = std::arg(field[i]);

    if (err <= cfg.err_tol) {
      converged = true;
      break;
    }
  }

  detail::unwrap_phase_from(phase, peak);
  const double offset = phase[peak];
  for (auto& v : phase) v -= offset;

  return {grid, std::move(phase), err, iters, converged, std::move(history)};
}

/// Time-reversal/conjugation twin of a retrieved phase: phi'(tau_j) =
/// -phi(tau_{(n-j) mod n}), re-anchored so comparison utilities can score both
/// orientations of the retrieval ambiguity.
inline RetrievedPhase conjugate_twin(const RetrievedPhase& r) {
  const std::size_t n = r.phase.size();
  RetrievedPhase out = r;
  for (std::size_t j = 0; j < n; ++j) out.phase[j] = -r.phase[(n - j) % n];
  return out;
}

/// Subtracts the reference phase pointwise from each entry. Correcting the
/// reference against itself yields the identically-zero profile.
inline std::vector<RetrievedPhase> baseline_correct(const std::vector<RetrievedPhase>& phases,
                                                    const RetrievedPhase& reference) {
  std::vector<RetrievedPhase> out;
  out.reserve(phases.size());
  for (const auto& p : phases) {
    if (!(p.grid == reference.grid))
      throw std::invalid_argument("baseline_correct: grid mismatch");
    RetrievedPhase corrected = p;
    for (std::size_t i = 0; i < corrected.phase.size(); ++i)
      corrected.phase[i] -= reference.phase[i];
    out.push_back(std::move(corrected));
  }
  return out;
}

/// Removes the SPM background accumulated in the lead-in fibre, modelled as a
/// lossless phase fiber_gamma_l x P_launched(tau) with the gamma L product
/// fitted from a decoupled-chip reference scan.
inline RetrievedPhase subtract_fiber_background(const RetrievedPhase& phase, double fiber_gamma_l,
                                                const PulseEnvelope& launched_pulse) {
  if (!(phase.grid == launched_pulse.grid))
    throw std::invalid_argument("subtract_fiber_background: grid mismatch");
  if (!(fiber_gamma_l >= 0.0))
    throw std::invalid_argument("subtract_fiber_background: fiber gamma L must be non-negative");
  RetrievedPhase out = phase;
  for (std::size_t i = 0; i < out.phase.size(); ++i)
    out.phase[i] -= fiber_gamma_l * launched_pulse.power[i];
  return out;
}

}  // namespace nlwg
