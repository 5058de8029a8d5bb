#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nlwg/constants.hpp"
#include "nlwg/errors.hpp"
#include "nlwg/optimize.hpp"

namespace nlwg {

// ---------------------------------------------------------------------------
// Bandgap
// ---------------------------------------------------------------------------

/// Varshni bandgap model E_gap(T) = E_gap(0) - beta T^2 / (T + delta).
struct VarshniParams {
  double e_gap_0_ev;     // bandgap at 0 K [eV]
  double beta_ev_per_k;  // slope [eV/K]
  double delta_k;        // offset [K]

  VarshniParams(double e0, double beta, double delta)
      : e_gap_0_ev(e0), beta_ev_per_k(beta), delta_k(delta) {
    if (!(e0 > 0.0) || !(beta > 0.0) || !(delta > 0.0))
      throw std::invalid_argument("VarshniParams: all parameters must be positive");
  }

  static VarshniParams silicon() { return VarshniParams(1.156, 7.021e-4, 1108.0); }
};

inline double varshni_gap_ev(double temperature_k, const VarshniParams& p) {
  if (!(temperature_k >= 0.0)) throw std::invalid_argument("varshni_gap: T must be >= 0");
  return p.e_gap_0_ev - p.beta_ev_per_k * temperature_k * temperature_k /
                            (temperature_k + p.delta_k);
}

// ---------------------------------------------------------------------------
// Two-photon absorption
// ---------------------------------------------------------------------------

/// Pairing of the squared transition energies with the Bose factors.
///
/// AsPrinted keeps the phonon-creation numerator (2 hw - Egap - Eph)^2 over
/// the occupation factor 1/(exp(E/kT) - 1) and the annihilation numerator
/// over 1/(1 - exp(-E/kT)). PhysicalBose swaps the factors to the physically
/// conventional assignment: creation goes with (n_B + 1), annihilation with
/// n_B. The two variants disagree by ~40% at room temperature; PhysicalBose
/// is the default because it approximately reproduces the measured values.
/// Both ship so the discrepancy stays auditable.
enum class TpaVariant { AsPrinted, PhysicalBose };

struct PhononBranch {
  std::string label;   // e.g. "TA", "TO"
  double e_ph_ev;      // phonon energy [eV]
  double amplitude;    // branch constant K_b (units give cm/GW)
};

struct TpaModelParams {
  std::vector<PhononBranch> branches;
  double photon_energy_ev;
  VarshniParams varshni;
  TpaVariant variant;

  TpaModelParams(std::vector<PhononBranch> b, double hw_ev, VarshniParams v,
                 TpaVariant var = TpaVariant::PhysicalBose)
      : branches(std::move(b)), photon_energy_ev(hw_ev), varshni(v), variant(var) {
    if (branches.empty()) throw std::invalid_argument("TpaModelParams: no phonon branches");
    for (const auto& br : branches)
      if (!(br.e_ph_ev > 0.0)) throw std::invalid_argument("TpaModelParams: e_ph must be positive");
    if (!(photon_energy_ev > 0.0))
      throw std::invalid_argument("TpaModelParams: photon energy must be positive");
  }

  /// Indirect-gap silicon near 1.55 um: TA and TO phonon branches at
  /// 212 K and 670 K equivalent temperature, photon energy 0.797 eV.
  static TpaModelParams silicon(TpaVariant variant = TpaVariant::PhysicalBose) {
    const double kb = constants::k_boltzmann_ev;
    return TpaModelParams({{"TA", 212.0 * kb, 0.233}, {"TO", 670.0 * kb, 2.138}}, 0.797,
                          VarshniParams::silicon(), variant);
  }
};

namespace detail {

// Thermal phonon occupation n_B and n_B + 1, evaluated analytically at T = 0.
inline double bose_n(double e_ph_ev, double temperature_k) {
  if (temperature_k == 0.0) return 0.0;
  const double x = e_ph_ev / (constants::k_boltzmann_ev * temperature_k);
  return 1.0 / std::expm1(x);
}

inline double bose_n_plus_1(double e_ph_ev, double temperature_k) {
  if (temperature_k == 0.0) return 1.0;
  const double x = e_ph_ev / (constants::k_boltzmann_ev * temperature_k);
  return 1.0 / (-std::expm1(-x));
}

}  // namespace detail

/// Per-branch response E_gap^{3/2} [F+ + F-] at unit branch amplitude, in the
/// model units that yield cm/GW. Shared by the model evaluation and the
/// linear amplitude fit. Throws std::domain_error when the phonon-creation
/// channel is closed (2 hw < E_gap + E_ph).
inline std::vector<double> tpa_branch_basis(double temperature_k, const TpaModelParams& p) {
  const double egap = varshni_gap_ev(temperature_k, p.varshni);
  const double two_hw = 2.0 * p.photon_energy_ev;
  const double prefactor = std::pow(egap, 1.5);
  std::vector<double> basis;
  basis.reserve(p.branches.size());
  for (const auto& br : p.branches) {
    const double creation = two_hw - egap - br.e_ph_ev;
    const double annihilation = two_hw - egap + br.e_ph_ev;
    if (creation < 0.0)
      throw std::domain_error("tpa_coefficient: phonon-creation channel closed (2hw < Egap + Eph)");
    const double nb = detail::bose_n(br.e_ph_ev, temperature_k);
    const double nb1 = detail::bose_n_plus_1(br.e_ph_ev, temperature_k);
    double f_plus, f_minus;
    if (p.variant == TpaVariant::AsPrinted) {
      f_plus = creation * creation * nb;
      f_minus = annihilation * annihilation * nb1;
    } else {
      f_plus = creation * creation * nb1;
      f_minus = annihilation * annihilation * nb;
    }
    basis.push_back(prefactor * (f_plus + f_minus));
  }
  return basis;
}

/// Phonon-assisted indirect TPA coefficient [cm/GW].
inline double tpa_coefficient_cm_per_gw(double temperature_k, const TpaModelParams& p) {
  if (!(temperature_k >= 0.0)) throw std::invalid_argument("tpa_coefficient: T must be >= 0");
  const auto basis = tpa_branch_basis(temperature_k, p);
  double beta = 0.0;
  for (std::size_t b = 0; b < basis.size(); ++b) beta += p.branches[b].amplitude * basis[b];
  return beta;
}

// ---------------------------------------------------------------------------
// Kerr coefficient
// ---------------------------------------------------------------------------

/// Empirical Kerr temperature model n2(T) = n2(0) [n_B + (n_B + 1)], i.e.
/// n2(0) coth(E_ph / 2 k_B T); returns n2(0) exactly at T = 0.
struct KerrModelParams {
  double n2_0_m2_per_w;    // Kerr coefficient at 0 K [m^2/W]
  double e_ph_over_kb_k;   // empirical phonon energy / k_B [K]

  KerrModelParams(double n2_0, double e_ph_k) : n2_0_m2_per_w(n2_0), e_ph_over_kb_k(e_ph_k) {
    if (!(n2_0 > 0.0) || !(e_ph_k > 0.0))
      throw std::invalid_argument("KerrModelParams: parameters must be positive");
  }

  static KerrModelParams silicon() { return KerrModelParams(3.86e-18, 576.0); }
};

inline double kerr_coefficient_m2_per_w(double temperature_k, const KerrModelParams& p) {
  if (!(temperature_k >= 0.0)) throw std::invalid_argument("kerr_coefficient: T must be >= 0");
  if (temperature_k == 0.0) return p.n2_0_m2_per_w;
  const double x = p.e_ph_over_kb_k / (2.0 * temperature_k);
  return p.n2_0_m2_per_w / std::tanh(x);
}

// ---------------------------------------------------------------------------
// Free-carrier absorption
// ---------------------------------------------------------------------------

/// Drude-type FCA cross-section from carrier effective masses and mobilities.
struct FcaDrudeParams {
  double wavelength_m;
  double refractive_index;
  double m_e_rel;  // electron effective mass [m0]
  double m_h_rel;  // hole effective mass [m0]
  double mu_e;     // electron mobility [m^2/(V s)]
  double mu_h;     // hole mobility [m^2/(V s)]

  FcaDrudeParams(double lambda, double n, double me, double mh, double mue, double muh)
      : wavelength_m(lambda), refractive_index(n), m_e_rel(me), m_h_rel(mh), mu_e(mue), mu_h(muh) {
    if (!(lambda > 0.0) || !(n > 0.0) || !(me > 0.0) || !(mh > 0.0) || !(mue > 0.0) || !(muh > 0.0))
      throw std::invalid_argument("FcaDrudeParams: all parameters must be positive");
  }

  static FcaDrudeParams silicon(double mu_e, double mu_h, double wavelength_m = 1.5518e-6) {
    return FcaDrudeParams(wavelength_m, 3.48, 0.3, 0.4, mu_e, mu_h);
  }
};

/// sigma_FCA = q^3 lambda^2 / (4 pi^2 eps0 c^3 n) (1/(me*^2 mu_e) + 1/(mh*^2 mu_h)).
inline double fca_cross_section_m2(const FcaDrudeParams& p) {
  using namespace constants;
  const double q = electron_charge;
  const double pref = q * q * q * p.wavelength_m * p.wavelength_m /
                      (4.0 * std::numbers::pi * std::numbers::pi * vacuum_permittivity *
                       speed_of_light * speed_of_light * speed_of_light * p.refractive_index);
  const double me = p.m_e_rel * free_electron_mass;
  const double mh = p.m_h_rel * free_electron_mass;
  return pref * (1.0 / (me * me * p.mu_e) + 1.0 / (mh * mh * p.mu_h));
}

/// Tabulated sigma_FCA(T) with piecewise-linear interpolation.
class FcaTable {
 public:
  explicit FcaTable(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("FcaTable: need at least two points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!(points_[i].second >= 0.0))
        throw std::invalid_argument("FcaTable: sigma values must be non-negative");
      if (i > 0 && !(points_[i].first > points_[i - 1].first))
        throw std::invalid_argument("FcaTable: temperatures must be strictly increasing");
    }
  }

  /// Built-in cryogenic silicon dataset (sigma in m^2).
  static FcaTable silicon_default() {
    return FcaTable(
        {{0.0, 0.0}, {5.5, 0.9e-22}, {50.0, 2.7e-22}, {150.0, 3.1e-22}, {300.0, 3.7e-22}});
  }

  const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }
  double min_temperature() const noexcept { return points_.front().first; }
  double max_temperature() const noexcept { return points_.back().first; }

 private:
  std::vector<std::pair<double, double>> points_;
};

inline double fca_lookup_m2(double temperature_k, const FcaTable& table) {
  if (!(temperature_k >= table.min_temperature()) || !(temperature_k <= table.max_temperature()))
    throw std::out_of_range("fca_lookup: temperature outside table range");
  const auto& pts = table.points();
  auto hi = std::lower_bound(pts.begin(), pts.end(), temperature_k,
                             [](const auto& pt, double t) { return pt.first < t; });
  if (hi == pts.begin()) return hi->second;
  if (hi == pts.end()) return pts.back().second;
  const auto lo = hi - 1;
  const double w = (temperature_k - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

// ---------------------------------------------------------------------------
// Figure of merit and photon-pair source metrics
// ---------------------------------------------------------------------------

/// Nonlinear figure of merit n2 / (lambda beta_tpa). A zero TPA coefficient
/// yields +infinity, which downstream metrics treat as the lossless limit.
inline double nonlinear_fom(double n2_m2_per_w, double beta_tpa_m_per_w, double wavelength_m) {
  if (!(n2_m2_per_w > 0.0) || !(wavelength_m > 0.0) || !(beta_tpa_m_per_w >= 0.0))
    throw std::invalid_argument("nonlinear_fom: invalid inputs");
  if (beta_tpa_m_per_w == 0.0) return std::numeric_limits<double>::infinity();
  return n2_m2_per_w / (wavelength_m * beta_tpa_m_per_w);
}

/// Operating point of a single-mode waveguide photon-pair source.
struct PairSourceScenario {
  double p_pair;  // pairs per pulse
  double purity;  // heralded-photon purity, in (0, 1)
  double fom;     // nonlinear figure of merit

  PairSourceScenario(double p, double pur, double figure) : p_pair(p), purity(pur), fom(figure) {
    if (!(p_pair > 0.0)) throw std::invalid_argument("PairSourceScenario: p_pair must be positive");
    if (!(purity > 0.0) || !(purity < 1.0))
      throw std::invalid_argument("PairSourceScenario: purity must lie in (0, 1)");
    if (!(fom > 0.0)) throw std::invalid_argument("PairSourceScenario: fom must be positive");
  }

  /// Weak-pump treatment is trustworthy only for small pair probability.
  bool weak_pump_ok() const noexcept { return p_pair <= 0.2; }
};

struct PairSourceMetrics {
  double xi;        // cross-TPA loss parameter
  double heralding; // Klyshko heralding efficiency 1/(1+xi)^2
  double gamma_lp;  // gamma L P implied by the pair probability
  bool weak_pump_ok;
};

/// Inverts the pair-generation probability for gamma L P and evaluates the
/// cross-TPA-limited heralding efficiency. xi uses the (1 - purity^2) reading
/// of the loss parameter; gamma_lp is reported so the direct inversion
/// xi = gamma_lp / (2 pi FOM) can also be formed by callers.
inline PairSourceMetrics pair_source_metrics(const PairSourceScenario& s) {
  const double one_minus_p2 = 1.0 - s.purity * s.purity;
  const double gamma_lp = std::sqrt(2.0 * s.p_pair * std::sqrt(s.purity / one_minus_p2));
  const double xi = 1.0 / (2.0 * std::numbers::pi * s.fom) *
                    std::sqrt(2.0 * s.p_pair * s.purity / std::sqrt(one_minus_p2));
  const double heralding = 1.0 / ((1.0 + xi) * (1.0 + xi));
  return {xi, heralding, gamma_lp, s.weak_pump_ok()};
}

// ---------------------------------------------------------------------------
// Fitting of model constants
// ---------------------------------------------------------------------------

struct TpaFitResult {
  std::vector<double> amplitudes;  // fitted K_b per branch
  double residual_rms;             // RMS of (model - data) in cm/GW
};

/// Least-squares branch amplitudes for the TPA model, linear in K_b at fixed
/// phonon energies, solved in closed form via the normal equations.
/// `fit_mask` freezes branches at their model value when false (nullptr fits
/// every branch). Throws degenerate_fit when the normal matrix is singular.
inline TpaFitResult fit_tpa_constants(const std::vector<std::pair<double, double>>& points,
                                      const TpaModelParams& model,
                                      const std::vector<bool>* fit_mask = nullptr) {
  const std::size_t nb = model.branches.size();
  std::vector<bool> mask(nb, true);
  if (fit_mask) {
    if (fit_mask->size() != nb) throw std::invalid_argument("fit_tpa_constants: mask size");
    mask = *fit_mask;
  }
  std::vector<std::size_t> free_idx;
  for (std::size_t b = 0; b < nb; ++b)
    if (mask[b]) free_idx.push_back(b);
  if (free_idx.empty()) throw std::invalid_argument("fit_tpa_constants: no free amplitudes");
  if (points.size() < free_idx.size())
    throw std::invalid_argument("fit_tpa_constants: need at least one point per free amplitude");

  // Basis rows and frozen-branch contribution per point.
  std::vector<std::vector<double>> rows;
  std::vector<double> target;
  rows.reserve(points.size());
  for (const auto& [t, beta] : points) {
    const auto basis = tpa_branch_basis(t, model);
    double frozen = 0.0;
    std::vector<double> row;
    row.reserve(free_idx.size());
    for (std::size_t b = 0; b < nb; ++b) {
      if (mask[b])
        row.push_back(basis[b]);
      else
        frozen += model.branches[b].amplitude * basis[b];
    }
    rows.push_back(std::move(row));
    target.push_back(beta - frozen);
  }

  const std::size_t k = free_idx.size();
  std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
  std::vector<double> atb(k, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      atb[a] += rows[i][a] * target[i];
      for (std::size_t b = 0; b < k; ++b) ata[a][b] += rows[i][a] * rows[i][b];
    }
  }
  std::vector<double> sol;
  try {
    sol = detail::solve_spd(ata, atb);
  } catch (const std::runtime_error&) {
    throw degenerate_fit("fit_tpa_constants: singular normal equations");
  }

  std::vector<double> amplitudes(nb);
  for (std::size_t b = 0; b < nb; ++b) amplitudes[b] = model.branches[b].amplitude;
  for (std::size_t a = 0; a < k; ++a) amplitudes[free_idx[a]] = sol[a];

  TpaModelParams fitted = model;
  for (std::size_t b = 0; b < nb; ++b) fitted.branches[b].amplitude = amplitudes[b];
  double ss = 0.0;
  for (const auto& [t, beta] : points) {
    const double r = tpa_coefficient_cm_per_gw(t, fitted) - beta;
    ss += r * r;
  }
  return {std::move(amplitudes), std::sqrt(ss / points.size())};
}

struct KerrFitResult {
  double n2_0_m2_per_w;
  double e_ph_over_kb_k;
  double residual_rms;
};

/// Fit (n2(0), E_ph/k_B) to (T, n2) data: 1-D scan over the phonon energy
/// with the closed-form linear amplitude at each candidate, refined by
/// golden-section search around the best scan cell.
inline KerrFitResult fit_kerr_constants(const std::vector<std::pair<double, double>>& points,
                                        double e_ph_lo_k = 20.0, double e_ph_hi_k = 4000.0) {
  if (points.size() < 2) throw std::invalid_argument("fit_kerr_constants: need >= 2 points");
  double t_min = points.front().first, t_max = points.front().first;
  for (const auto& [t, v] : points) {
    if (!(t >= 0.0)) throw std::invalid_argument("fit_kerr_constants: T must be >= 0");
    if (!(v > 0.0)) throw std::invalid_argument("fit_kerr_constants: n2 values must be positive");
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
  }
  if (t_min == t_max)
    throw degenerate_fit("fit_kerr_constants: phonon energy unidentifiable from a single T");

  auto coth_factor = [](double t, double e_ph) {
    return t == 0.0 ? 1.0 : 1.0 / std::tanh(e_ph / (2.0 * t));
  };
  auto sse_and_n2 = [&](double e_ph) {
    double cy = 0.0, cc = 0.0;
    for (const auto& [t, v] : points) {
      const double c = coth_factor(t, e_ph);
      cy += c * v;
      cc += c * c;
    }
    const double n2_0 = cy / cc;
    double ss = 0.0;
    for (const auto& [t, v] : points) {
      const double r = n2_0 * coth_factor(t, e_ph) - v;
      ss += r * r;
    }
    return std::make_pair(ss, n2_0);
  };

  // Log-spaced scan, then local refinement.
  const int n_scan = 160;
  double best_e = e_ph_lo_k, best_ss = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_scan; ++i) {
    const double e = e_ph_lo_k * std::pow(e_ph_hi_k / e_ph_lo_k, double(i) / (n_scan - 1));
    const double ss = sse_and_n2(e).first;
    if (ss < best_ss) {
      best_ss = ss;
      best_e = e;
    }
  }
  const double ratio = std::pow(e_ph_hi_k / e_ph_lo_k, 1.0 / (n_scan - 1));
  const double lo = best_e / ratio, hi = best_e * ratio;
  const auto refined = golden_section_min([&](double e) { return sse_and_n2(e).first; }, lo, hi,
                                          1e-4 * best_e);
  const auto [ss, n2_0] = sse_and_n2(refined.x);
  return {n2_0, refined.x, std::sqrt(ss / points.size())};
}

}  // namespace nlwg
