#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace nlwg {

/// Uniform grid in retarded time tau = t - z/v_g. The group velocity is
/// absorbed into the frame and never appears numerically. The sample count is
/// restricted to powers of two because the phase-retrieval module feeds these
/// samples straight into a radix-2 FFT.
class TemporalGrid {
 public:
  TemporalGrid(int n_samples, double dt, double t0) : n_(n_samples), dt_(dt), t0_(t0) {
    if (n_ < 2 || (n_ & (n_ - 1)) != 0)
      throw std::invalid_argument("TemporalGrid: n_samples must be a power of two >= 2");
    if (!(dt_ > 0.0) || !std::isfinite(dt_))
      throw std::invalid_argument("TemporalGrid: dt must be positive");
    if (!std::isfinite(t0_)) throw std::invalid_argument("TemporalGrid: t0 must be finite");
  }

  /// Window of total span `window` centred on tau = 0.
  static TemporalGrid centered(int n_samples, double window) {
    if (!(window > 0.0)) throw std::invalid_argument("TemporalGrid: window must be positive");
    return TemporalGrid(n_samples, window / n_samples, -window / 2.0);
  }

  int n_samples() const noexcept { return n_; }
  double dt() const noexcept { return dt_; }
  double t0() const noexcept { return t0_; }
  double window() const noexcept { return n_ * dt_; }
  double time(int i) const noexcept { return t0_ + i * dt_; }

  std::vector<double> times() const {
    std::vector<double> t(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) t[static_cast<std::size_t>(i)] = time(i);
    return t;
  }

  /// Signed harmonic number of FFT bin k (k in [0, n)).
  int harmonic(int k) const noexcept { return k < n_ / 2 ? k : k - n_; }

  /// Angular frequency offset of FFT bin k relative to the carrier.
  double angular_frequency(int k) const noexcept {
    return 2.0 * std::numbers::pi * harmonic(k) / (n_ * dt_);
  }

  double nyquist_angular_frequency() const noexcept { return std::numbers::pi / dt_; }

  bool operator==(const TemporalGrid&) const = default;

 private:
  int n_;
  double dt_;
  double t0_;
};

/// A sampled real-valued function of retarded time on a specific grid.
struct GriddedSeries {
  TemporalGrid grid;
  std::vector<double> values;
};

}  // namespace nlwg
