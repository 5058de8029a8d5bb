#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nlwg/errors.hpp"
#include "nlwg/optimize.hpp"
#include "nlwg/phase_retrieval.hpp"
#include "nlwg/propagation.hpp"
#include "nlwg/pulse.hpp"
#include "nlwg/waveguide.hpp"

namespace nlwg {

/// Cross-over switch state. Off: light enters the chip through coupler L and
/// exits through R. On: the path is reversed and the switch adds the excess
/// loss eta_X, half of it (amplitude-wise, sqrt(eta_X)) before the chip.
enum class Direction { On, Off };

inline const char* to_string(Direction d) { return d == Direction::On ? "on" : "off"; }

/// One directional power sweep at fixed temperature. Powers are SI averages
/// measured in the fibre on either side of the chip.
struct PowerScan {
  Direction direction;
  double temperature;                              // [K]
  std::vector<std::pair<double, double>> samples;  // (p_in_avg, p_out_avg) [W]
  double excess_loss_on = 1.0;                     // switch transmittance eta_X, used when On

  PowerScan(Direction dir, double temperature_k, std::vector<std::pair<double, double>> s,
            double eta_x = 1.0)
      : direction(dir), temperature(temperature_k), samples(std::move(s)), excess_loss_on(eta_x) {
    if (samples.empty()) throw std::invalid_argument("PowerScan: no samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!(samples[i].first > 0.0) || !(samples[i].second > 0.0))
        throw std::invalid_argument("PowerScan: powers must be positive");
      if (i > 0 && samples[i].first < samples[i - 1].first)
        throw std::invalid_argument("PowerScan: samples must be ordered by input power");
    }
    if (!(excess_loss_on > 0.0) || !(excess_loss_on <= 1.0))
      throw std::invalid_argument("PowerScan: excess_loss_on must lie in (0, 1]");
  }
};

struct TransmissionFit {
  double alpha;                // waveguide linear loss used by the model [1/m]
  double alpha_tpa_apparent;   // [1/(W m)]
  double coupler_mean;         // assumed per-coupler transmittance sqrt(eta_L eta_R)
  double intercept;            // fitted zero-power 1/T (fibre to fibre)
  double residual_rms;
  double covariance;           // variance estimate of alpha_tpa_apparent
  double sigma_fca_assumed;    // FCA cross-section held fixed during the fit [m^2]
  Direction direction;
  double temperature;
};

/// Two-stage fit of a directional inverse-transmission scan.
///
/// Stage 1 estimates the zero-power intercept from a straight line through
/// the low-power points; with the waveguide loss known from configuration the
/// residual linear loss is split equally between the two couplers. Stage 2 is
/// a derivative-free golden-section minimisation over the apparent TPA
/// parameter of the squared misfit between measured 1/T and the forward model
/// (full pulse propagation, couplers applied), with model evaluations served
/// from a memoised cache.
inline TransmissionFit fit_inverse_transmission(const PowerScan& scan, const TemporalGrid& grid,
                                                const LaserSpec& laser, const WaveguideSpec& wg,
                                                double sigma_fca, const SolverConfig& cfg) {
  const auto& samples = scan.samples;
  if (samples.size() < 4)
    throw std::invalid_argument("fit_inverse_transmission: need at least 4 samples");
  const double p_min = samples.front().first;
  const double p_max = samples.back().first;
  if (!(p_max / p_min >= 10.0))
    throw std::invalid_argument("fit_inverse_transmission: scan must span at least 10 dB");

  std::vector<double> p(samples.size()), y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    p[i] = samples[i].first;
    y[i] = samples[i].first / samples[i].second;
  }

  // Stage 1: straight line through the low-power end (lowest ~6 dB of the
  // scan, at least three points) pins the intercept.
  std::size_t n_low = 0;
  while (n_low < p.size() && p[n_low] <= p_min * 4.0) ++n_low;
  n_low = std::max<std::size_t>(n_low, std::min<std::size_t>(3, p.size()));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n_low; ++i) {
    sx += p[i];
    sy += y[i];
    sxx += p[i] * p[i];
    sxy += p[i] * y[i];
  }
  const double m = static_cast<double>(n_low);
  const double denom = m * sxx - sx * sx;
  const double intercept = denom != 0.0 ? (sy * sxx - sx * sxy) / denom : sy / m;
  if (!(intercept > 0.0))
    throw data_inconsistent("fit_inverse_transmission: non-positive zero-power intercept");

  const double eta_dir = scan.direction == Direction::On ? scan.excess_loss_on : 1.0;
  const double g2 = std::exp(wg.linear_loss * wg.length) / (intercept * eta_dir);
  if (!(g2 > 0.0) || g2 > 1.0)
    throw data_inconsistent("fit_inverse_transmission: implied coupler transmittance outside (0, 1]");
  const double g = std::sqrt(g2);
  const double pre_chip = scan.direction == Direction::On ? g * std::sqrt(eta_dir) : g;

  // Stage 2: 1-D minimisation over the apparent TPA parameter.
  auto model_inv_t = [&](double p_in, double alpha_tpa) {
    const double peak = peak_from_average(pre_chip * p_in, laser);
    const NonlinearCoeffs nl(0.0, alpha_tpa * wg.a_eff, sigma_fca, 0.0);
    const auto pulse = sech2_pulse(grid, peak, laser.fwhm);
    const auto res = propagate(pulse, laser, wg, nl, cfg);
    return 1.0 / (g2 * eta_dir * res.transmission);
  };

  std::map<double, double> sse_cache;
  auto sse = [&](double alpha_tpa) {
    if (auto it = sse_cache.find(alpha_tpa); it != sse_cache.end()) return it->second;
    double ss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double r = model_inv_t(p[i], alpha_tpa) - y[i];
      ss += r * r;
    }
    sse_cache.emplace(alpha_tpa, ss);
    return ss;
  };

  // Expand the bracket until the model overshoots the strongest observed
  // nonlinearity at the top scan power.
  const double y_top = *std::max_element(y.begin(), y.end());
  double hi = 50.0;
  while (model_inv_t(p_max, hi) < y_top) {
    hi *= 2.0;
    if (hi > 1e7) throw fit_failure("fit_inverse_transmission: bracket expansion failed");
  }

  const auto best = golden_section_min(sse, 0.0, hi, std::max(hi * 1e-5, 1e-9));
  const double at_hat = best.x;
  const double sse_hat = best.fx;

  // Finite-difference curvature -> variance estimate of the fitted parameter.
  const double h = std::max(1e-3 * at_hat, 1e-3 * hi * 1e-3);
  double covariance = std::numeric_limits<double>::infinity();
  if (at_hat > h) {
    const double d2 = (sse(at_hat + h) - 2.0 * sse_hat + sse(at_hat - h)) / (h * h);
    if (d2 > 0.0) {
      const double dof = std::max<double>(1.0, static_cast<double>(p.size()) - 2.0);
      covariance = 2.0 * (sse_hat / dof) / d2;
    }
  }

  return {wg.linear_loss,
          at_hat,
          g,
          intercept,
          std::sqrt(sse_hat / static_cast<double>(p.size())),
          covariance,
          sigma_fca,
          scan.direction,
          scan.temperature};
}

struct BidirectionalResult {
  double alpha_tpa_true;                 // [1/(W m)]
  std::optional<double> sigma_fca_true;  // [m^2], when both fits recorded one
  double eta_l;                          // input coupler of the Off orientation
  double eta_r;
  double coupler_mean;                   // sqrt(eta_l eta_r)
  double temperature;
};

/// Combines an on/off pair of apparent fits: the true TPA parameter is the
/// geometric mean of the apparent ones, and the coupler asymmetry follows
/// from their ratio (eta_L / eta_R equals the apparent ratio with eta_L the
/// input coupler of the Off orientation; eta_L eta_R equals the squared mean
/// coupler loss).
inline BidirectionalResult combine_bidirectional(const TransmissionFit& fit_on,
                                                 const TransmissionFit& fit_off) {
  if (fit_on.direction != Direction::On || fit_off.direction != Direction::Off)
    throw std::invalid_argument("combine_bidirectional: expected one On and one Off fit");
  if (fit_on.temperature != fit_off.temperature)
    throw std::invalid_argument("combine_bidirectional: fits must share a temperature");
  if (!(fit_on.alpha_tpa_apparent > 0.0) || !(fit_off.alpha_tpa_apparent > 0.0))
    throw std::invalid_argument("combine_bidirectional: apparent TPA values must be positive");

  const double ratio = fit_off.alpha_tpa_apparent / fit_on.alpha_tpa_apparent;
  const double g = std::sqrt(fit_on.coupler_mean * fit_off.coupler_mean);
  std::optional<double> sigma_true;
  if (fit_on.sigma_fca_assumed > 0.0 && fit_off.sigma_fca_assumed > 0.0)
    sigma_true = std::sqrt(fit_on.sigma_fca_assumed * fit_off.sigma_fca_assumed);
  return {std::sqrt(fit_on.alpha_tpa_apparent * fit_off.alpha_tpa_apparent),
          sigma_true,
          g * std::sqrt(ratio),
          g / std::sqrt(ratio),
          g,
          fit_on.temperature};
}

struct PhaseFit {
  double gamma;         // [1/(W m)]
  double mu;            // FCD relative strength
  double residual_rms;  // [rad] over the fitted samples
  bool mu_identifiable;
};

/// Linear least squares for (gamma, mu) against sampled phase data using
/// precomputed S/T tables: phi = gamma S - (sigma mu / 2) T is linear in
/// (gamma, sigma mu / 2) and solves in closed form via 2x2 normal equations.
/// The mask selects the fitted samples. When the T regressor vanishes or the
/// system is rank-deficient the fit degrades to the 1-parameter gamma fit and
/// flags mu as unidentifiable; an all-zero S regressor is a degenerate_fit.
inline PhaseFit fit_phase_profile_masked(const std::vector<double>& phase,
                                         const std::vector<double>& s,
                                         const std::vector<double>& t,
                                         const std::vector<char>& mask, double sigma_fca) {
  if (phase.size() != s.size() || phase.size() != t.size() || phase.size() != mask.size())
    throw std::invalid_argument("fit_phase_profile: length mismatch");
  double sss = 0, sst = 0, stt = 0, ssp = 0, stp = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < phase.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    sss += s[i] * s[i];
    sst += s[i] * t[i];
    stt += t[i] * t[i];
    ssp += s[i] * phase[i];
    stp += t[i] * phase[i];
  }
  if (count < 2 || !(sss > 0.0))
    throw degenerate_fit("fit_phase_profile: no usable S support in the fit window");

  const double det = sss * stt - sst * sst;
  double gamma, b;
  bool identifiable;
  if (sigma_fca > 0.0 && stt > 0.0 && det > 1e-12 * sss * stt) {
    gamma = (ssp * stt - sst * stp) / det;
    b = (gamma * sst - stp) / stt;
    identifiable = true;
  } else {
    gamma = ssp / sss;
    b = 0.0;
    identifiable = false;
  }

  double ss_res = 0.0;
  for (std::size_t i = 0; i < phase.size(); ++i) {
    if (!mask[i]) continue;
    const double r = phase[i] - gamma * s[i] + b * t[i];
    ss_res += r * r;
  }
  const double mu = identifiable ? 2.0 * b / sigma_fca : 0.0;
  return {gamma, mu, std::sqrt(ss_res / static_cast<double>(count)), identifiable};
}

/// Default fit window: samples whose path-averaged power S(tau) exceeds 5% of
/// its peak.
inline std::vector<char> st_fit_mask(const std::vector<double>& s) {
  const double peak = *std::max_element(s.begin(), s.end());
  std::vector<char> mask(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) mask[i] = s[i] > 0.05 * peak ? 1 : 0;
  return mask;
}

inline PhaseFit fit_phase_profile(const RetrievedPhase& phase, const StTable& st,
                                  double sigma_fca) {
  if (!(phase.grid == st.grid)) throw std::invalid_argument("fit_phase_profile: grid mismatch");
  return fit_phase_profile_masked(phase.phase, st.s, st.t, st_fit_mask(st.s), sigma_fca);
}

struct TemperatureSeries {
  struct Entry {
    double temperature;
    double mean;
    double std_dev;  // sample standard deviation, 0 when undefined
    int count;
    bool spread_defined;
  };
  std::vector<Entry> entries;  // ascending temperature
};

/// Per-temperature arithmetic mean and sample standard deviation. Values are
/// sorted inside each group before accumulation, so the result is invariant
/// under permutation of the inputs. Groups of one carry an undefined-spread
/// flag.
inline TemperatureSeries aggregate_series(const std::vector<std::pair<double, double>>& tagged) {
  if (tagged.empty()) return {};
  std::map<double, std::vector<double>> groups;
  for (const auto& [t, v] : tagged) groups[t].push_back(v);
  TemperatureSeries series;
  for (auto& [t, values] : groups) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double std_dev = 0.0;
    const bool defined = values.size() >= 2;
    if (defined) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    series.entries.push_back({t, mean, std_dev, static_cast<int>(values.size()), defined});
  }
  return series;
}

inline TemperatureSeries aggregate_series(const std::vector<BidirectionalResult>& results) {
  std::vector<std::pair<double, double>> tagged;
  tagged.reserve(results.size());
  for (const auto& r : results) tagged.emplace_back(r.temperature, r.alpha_tpa_true);
  return aggregate_series(tagged);
}

}  // namespace nlwg
