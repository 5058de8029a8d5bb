#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nlwg {

/// Geometry and linear properties of the waveguide under test. chi_gen is the
/// sixth-order mode-overlap factor [1/m^4] that weights carrier generation,
/// beta_bar = beta_tpa * chi_gen; for a top-hat mode it equals 1/a_eff^2.
struct WaveguideSpec {
  double length;            // [m]
  double linear_loss;       // power loss alpha [1/m]
  double a_eff;             // SPM effective area [m^2]
  double chi_gen;           // carrier-generation overlap factor [1/m^4]
  double carrier_lifetime;  // free-carrier lifetime tau_c [s]

  WaveguideSpec(double length_m, double linear_loss_per_m, double a_eff_m2, double chi_per_m4,
                double carrier_lifetime_s)
      : length(length_m),
        linear_loss(linear_loss_per_m),
        a_eff(a_eff_m2),
        chi_gen(chi_per_m4),
        carrier_lifetime(carrier_lifetime_s) {
    if (!(length > 0.0)) throw std::invalid_argument("WaveguideSpec: length must be positive");
    if (!(linear_loss >= 0.0) || !std::isfinite(linear_loss))
      throw std::invalid_argument("WaveguideSpec: linear loss must be finite and non-negative");
    if (!(a_eff > 0.0)) throw std::invalid_argument("WaveguideSpec: a_eff must be positive");
    if (!(chi_gen > 0.0)) throw std::invalid_argument("WaveguideSpec: chi_gen must be positive");
    if (!(carrier_lifetime > 0.0))
      throw std::invalid_argument("WaveguideSpec: carrier lifetime must be positive");
  }

  /// Uniform-mode approximation for the overlap factor.
  static double chi_uniform(double a_eff_m2) { return 1.0 / (a_eff_m2 * a_eff_m2); }

  /// Effective interaction length (1 - e^{-alpha L}) / alpha.
  double effective_length() const {
    if (linear_loss == 0.0) return length;
    return -std::expm1(-linear_loss * length) / linear_loss;
  }
};

/// Material nonlinear coefficients. The waveguide-scaled parameters
/// gamma = k0 n2 / A_eff and alpha_tpa = beta_tpa / A_eff are exposed as
/// accessors instead of stored, so a coefficient set can be reused across
/// geometries.
struct NonlinearCoeffs {
  double n2;         // Kerr coefficient [m^2/W]
  double beta_tpa;   // TPA coefficient [m/W]
  double sigma_fca;  // FCA cross-section [m^2]
  double mu;         // FCD relative strength [dimensionless]

  NonlinearCoeffs(double n2_m2_per_w, double beta_tpa_m_per_w, double sigma_fca_m2,
                  double mu_fcd)
      : n2(n2_m2_per_w), beta_tpa(beta_tpa_m_per_w), sigma_fca(sigma_fca_m2), mu(mu_fcd) {
    if (!(n2 >= 0.0) || !(beta_tpa >= 0.0) || !(sigma_fca >= 0.0))
      throw std::invalid_argument("NonlinearCoeffs: n2, beta_tpa, sigma_fca must be non-negative");
    if (!std::isfinite(mu)) throw std::invalid_argument("NonlinearCoeffs: mu must be finite");
  }

  static NonlinearCoeffs none() { return NonlinearCoeffs(0.0, 0.0, 0.0, 0.0); }

  /// Waveguide Kerr parameter gamma = k0 n2 / A_eff [1/(W m)].
  double gamma(double wavelength_m, double a_eff_m2) const {
    return 2.0 * std::numbers::pi / wavelength_m * n2 / a_eff_m2;
  }

  /// Waveguide TPA parameter alpha_tpa = beta_tpa / A_eff [1/(W m)].
  double alpha_tpa(double a_eff_m2) const { return beta_tpa / a_eff_m2; }
};

}  // namespace nlwg
