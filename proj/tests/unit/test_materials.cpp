#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nlwg/constants.hpp"
#include "nlwg/materials.hpp"

using namespace nlwg;

namespace {

// Independent term-by-term transcription of the TPA model, kept deliberately
// separate from the library implementation.
double tpa_oracle(double t_k, double hw_ev, bool physical_pairing) {
  const double kb = constants::k_boltzmann_ev;
  const double egap = 1.156 - 7.021e-4 * t_k * t_k / (t_k + 1108.0);
  const double pref = std::sqrt(egap) * egap;
  struct Branch {
    double e_ph, k;
  };
  const Branch branches[2] = {{212.0 * kb, 0.233}, {670.0 * kb, 2.138}};
  double beta = 0.0;
  for (const auto& br : branches) {
    const double c = 2.0 * hw_ev - egap - br.e_ph;
    const double a = 2.0 * hw_ev - egap + br.e_ph;
    double nb = 0.0, nb1 = 1.0;
    if (t_k > 0.0) {
      nb = 1.0 / (std::exp(br.e_ph / (kb * t_k)) - 1.0);
      nb1 = 1.0 / (1.0 - std::exp(-br.e_ph / (kb * t_k)));
    }
    const double f_plus = physical_pairing ? c * c * nb1 : c * c * nb;
    const double f_minus = physical_pairing ? a * a * nb : a * a * nb1;
    beta += br.k * pref * (f_plus + f_minus);
  }
  return beta;
}

}  // namespace

TEST_CASE("Varshni bandgap") {
  const auto p = VarshniParams::silicon();
  CHECK(varshni_gap_ev(0.0, p) == 1.156);
  const double at_300 = 1.156 - 7.021e-4 * 300.0 * 300.0 / (300.0 + 1108.0);
  CHECK_THAT(varshni_gap_ev(300.0, p), Catch::Matchers::WithinRel(at_300, 1e-14));
  CHECK_THAT(varshni_gap_ev(300.0, p), Catch::Matchers::WithinAbs(1.11112, 1e-5));
  CHECK_THAT(varshni_gap_ev(5.5, p), Catch::Matchers::WithinAbs(1.15598, 1e-5));
  CHECK_THROWS_AS(varshni_gap_ev(-1.0, p), std::invalid_argument);
}

TEST_CASE("TPA coefficient against the independent oracle") {
  const auto physical = TpaModelParams::silicon(TpaVariant::PhysicalBose);
  const auto printed = TpaModelParams::silicon(TpaVariant::AsPrinted);

  for (double t : {0.0, 5.5, 50.0, 150.0, 300.0}) {
    CHECK_THAT(tpa_coefficient_cm_per_gw(t, physical),
               Catch::Matchers::WithinRel(tpa_oracle(t, 0.797, true), 1e-12));
    CHECK_THAT(tpa_coefficient_cm_per_gw(t, printed),
               Catch::Matchers::WithinRel(tpa_oracle(t, 0.797, false), 1e-12));
  }
  // Frozen values from high-precision evaluation.
  CHECK_THAT(tpa_coefficient_cm_per_gw(300.0, physical), Catch::Matchers::WithinAbs(0.778, 1e-3));
  CHECK_THAT(tpa_coefficient_cm_per_gw(5.5, physical), Catch::Matchers::WithinAbs(0.435, 1e-3));
  CHECK_THAT(tpa_coefficient_cm_per_gw(300.0, printed), Catch::Matchers::WithinAbs(1.067, 1e-3));
}

TEST_CASE("TPA phonon-annihilation terms vanish at T = 0") {
  // At T = 0 the occupation factor n_B is exactly zero, so only the term
  // paired with (n_B + 1) survives in either variant.
  const double kb = constants::k_boltzmann_ev;
  for (auto variant : {TpaVariant::PhysicalBose, TpaVariant::AsPrinted}) {
    const auto p = TpaModelParams::silicon(variant);
    const double beta0 = tpa_coefficient_cm_per_gw(0.0, p);
    const double egap = varshni_gap_ev(0.0, p.varshni);
    double survivors = 0.0;
    for (const auto& br : p.branches) {
      const double c = 2.0 * p.photon_energy_ev - egap - br.e_ph_ev;
      const double a = 2.0 * p.photon_energy_ev - egap + br.e_ph_ev;
      const double numerator = variant == TpaVariant::PhysicalBose ? c * c : a * a;
      survivors += br.amplitude * std::pow(egap, 1.5) * numerator;
    }
    CHECK_THAT(beta0, Catch::Matchers::WithinRel(survivors, 1e-13));
    // Continuity: the T -> 0 limit approaches the analytic T = 0 value.
    CHECK_THAT(tpa_coefficient_cm_per_gw(1e-3, p), Catch::Matchers::WithinRel(beta0, 1e-9));
  }
  (void)kb;
}

TEST_CASE("TPA channel-closed error") {
  // Photon energy low enough that 2hw < Egap + Eph.
  TpaModelParams p = TpaModelParams::silicon();
  p.photon_energy_ev = 0.55;
  CHECK_THROWS_AS(tpa_coefficient_cm_per_gw(300.0, p), std::domain_error);
}

TEST_CASE("TPA terms are non-negative at all temperatures") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> t_dist(0.0, 600.0);
  const auto physical = TpaModelParams::silicon(TpaVariant::PhysicalBose);
  const auto printed = TpaModelParams::silicon(TpaVariant::AsPrinted);
  for (int i = 0; i < 200; ++i) {
    const double t = t_dist(rng);
    for (double b : tpa_branch_basis(t, physical)) CHECK(b >= 0.0);
    for (double b : tpa_branch_basis(t, printed)) CHECK(b >= 0.0);
  }
}

TEST_CASE("Kerr coefficient reproduces the published column") {
  const auto p = KerrModelParams::silicon();
  CHECK_THAT(kerr_coefficient_m2_per_w(300.0, p), Catch::Matchers::WithinRel(5.18e-18, 5e-3));
  CHECK_THAT(kerr_coefficient_m2_per_w(150.0, p), Catch::Matchers::WithinRel(4.03e-18, 5e-3));
  CHECK(kerr_coefficient_m2_per_w(0.0, p) == 3.86e-18);
}

TEST_CASE("Kerr coth form equals the two-term Bose sum") {
  const auto p = KerrModelParams::silicon();
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> t_dist(0.05, 1500.0);
  double prev_t = 0.0, prev_n2 = kerr_coefficient_m2_per_w(0.0, p);
  (void)prev_t;
  (void)prev_n2;
  for (int i = 0; i < 300; ++i) {
    const double t = t_dist(rng);
    const double x = p.e_ph_over_kb_k / t;
    const double sum_form = p.n2_0_m2_per_w * (1.0 / std::expm1(x) + 1.0 / (-std::expm1(-x)));
    CHECK_THAT(kerr_coefficient_m2_per_w(t, p), Catch::Matchers::WithinRel(sum_form, 1e-12));
  }
  // Strictly increasing in T wherever the coth deviation is representable in
  // double precision (below ~16 K it saturates to n2(0) exactly).
  double last = kerr_coefficient_m2_per_w(20.0, p);
  for (double t = 27.3; t <= 800.0; t += 7.3) {
    const double n2 = kerr_coefficient_m2_per_w(t, p);
    CHECK(n2 > last);
    last = n2;
  }
  for (double t : {0.5, 5.0, 15.0})
    CHECK(kerr_coefficient_m2_per_w(t, p) >= p.n2_0_m2_per_w);
}

TEST_CASE("headline reductions from the endpoint values") {
  // Using the published endpoint values as inputs.
  CHECK_THAT(1.0 - 0.420 / 0.761, Catch::Matchers::WithinAbs(0.448, 5e-4));
  CHECK_THAT(1.0 - 3.86 / 5.18, Catch::Matchers::WithinAbs(0.255, 5e-4));
}

TEST_CASE("Drude FCA cross-section") {
  const auto p = FcaDrudeParams::silicon(0.03, 0.01);
  // Constant-by-constant evaluation, independent transcription.
  const double q = 1.602177e-19, eps0 = 8.854188e-12, c = 2.997925e8, m0 = 9.109384e-31;
  const double lam = 1.5518e-6;
  const double pref = std::pow(q, 3) * lam * lam /
                      (4.0 * std::numbers::pi * std::numbers::pi * eps0 * std::pow(c, 3) * 3.48);
  const double expected = pref * (1.0 / (0.09 * m0 * m0 * 0.03) + 1.0 / (0.16 * m0 * m0 * 0.01));
  CHECK_THAT(fca_cross_section_m2(p), Catch::Matchers::WithinRel(expected, 1e-12));
  CHECK_THAT(fca_cross_section_m2(p), Catch::Matchers::WithinRel(3.62e-22, 2e-3));
  // Within 5% of the tabulated room-temperature value.
  CHECK_THAT(fca_cross_section_m2(p), Catch::Matchers::WithinRel(3.7e-22, 0.05));

  // Doubling both mobilities halves sigma.
  const auto doubled = FcaDrudeParams::silicon(0.06, 0.02);
  CHECK_THAT(fca_cross_section_m2(doubled),
             Catch::Matchers::WithinRel(0.5 * fca_cross_section_m2(p), 1e-12));

  // A very mobile hole leaves only the electron term.
  const auto e_only = FcaDrudeParams::silicon(0.03, 1e12);
  const double electron_term = pref / (0.09 * m0 * m0 * 0.03);
  CHECK_THAT(fca_cross_section_m2(e_only), Catch::Matchers::WithinRel(electron_term, 1e-9));
}

TEST_CASE("FCA table interpolation") {
  const auto table = FcaTable::silicon_default();
  CHECK(fca_lookup_m2(300.0, table) == 3.7e-22);
  CHECK(fca_lookup_m2(0.0, table) == 0.0);
  CHECK_THAT(fca_lookup_m2(225.0, table), Catch::Matchers::WithinRel(3.4e-22, 1e-12));
  CHECK_THROWS_AS(fca_lookup_m2(301.0, table), std::out_of_range);
  CHECK_THROWS_AS(fca_lookup_m2(-1.0, table), std::out_of_range);
  CHECK_THROWS_AS(FcaTable({{300.0, 1e-22}, {100.0, 1e-22}}), std::invalid_argument);
}

TEST_CASE("nonlinear figure of merit") {
  CHECK_THAT(nonlinear_fom(5.18e-18, 0.761e-11, 1.551e-6), Catch::Matchers::WithinAbs(0.44, 0.01));
  CHECK_THAT(nonlinear_fom(3.86e-18, 0.420e-11, 1.551e-6), Catch::Matchers::WithinAbs(0.59, 0.01));
  // Linearity in n2.
  CHECK_THAT(nonlinear_fom(2.0 * 5.18e-18, 0.761e-11, 1.551e-6),
             Catch::Matchers::WithinRel(2.0 * nonlinear_fom(5.18e-18, 0.761e-11, 1.551e-6), 1e-12));
  CHECK(std::isinf(nonlinear_fom(5.18e-18, 0.0, 1.551e-6)));
}

TEST_CASE("pair source metrics reproduce the worked heralding numbers") {
  const auto m044 = pair_source_metrics(PairSourceScenario(0.05, 0.9, 0.44));
  CHECK_THAT(m044.heralding, Catch::Matchers::WithinAbs(0.74, 0.01));
  const auto m059 = pair_source_metrics(PairSourceScenario(0.05, 0.9, 0.59));
  CHECK_THAT(m059.heralding, Catch::Matchers::WithinAbs(0.79, 0.01));
  const auto m44 = pair_source_metrics(PairSourceScenario(0.05, 0.9, 4.4));
  CHECK_THAT(m44.heralding, Catch::Matchers::WithinAbs(0.97, 0.005));

  // gamma L P from direct inversion of the pair probability.
  const double one_minus_p2 = 1.0 - 0.81;
  const double glp = std::sqrt(2.0 * 0.05 * std::sqrt(0.9 / one_minus_p2));
  CHECK_THAT(m044.gamma_lp, Catch::Matchers::WithinRel(glp, 1e-12));

  // Lossless limit: xi -> 0, heralding -> 1.
  const auto lossless =
      pair_source_metrics(PairSourceScenario(0.05, 0.9, std::numeric_limits<double>::infinity()));
  CHECK(lossless.xi == 0.0);
  CHECK(lossless.heralding == 1.0);

  CHECK_THROWS_AS(PairSourceScenario(0.05, 1.2, 0.44), std::invalid_argument);
  CHECK_THROWS_AS(PairSourceScenario(0.05, 0.0, 0.44), std::invalid_argument);
  CHECK_FALSE(PairSourceScenario(0.3, 0.9, 0.44).weak_pump_ok());
}

TEST_CASE("heralding is increasing in FOM and saturates at one") {
  double last = 0.0;
  for (double fom = 0.1; fom < 1e5; fom *= 1.7) {
    const double h = pair_source_metrics(PairSourceScenario(0.05, 0.9, fom)).heralding;
    CHECK(h > last);
    last = h;
  }
  CHECK(last > 0.9999);
}

TEST_CASE("TPA amplitude fit recovers synthetic constants") {
  const auto model = TpaModelParams::silicon(TpaVariant::PhysicalBose);
  TpaModelParams truth = model;
  truth.branches[0].amplitude = 0.311;
  truth.branches[1].amplitude = 1.874;
  std::vector<std::pair<double, double>> points;
  for (int i = 0; i < 20; ++i) {
    const double t = 5.0 + 15.5 * i;
    points.emplace_back(t, tpa_coefficient_cm_per_gw(t, truth));
  }
  const auto fit = fit_tpa_constants(points, model);
  CHECK_THAT(fit.amplitudes[0], Catch::Matchers::WithinRel(0.311, 1e-6));
  CHECK_THAT(fit.amplitudes[1], Catch::Matchers::WithinRel(1.874, 1e-6));
  CHECK(fit.residual_rms < 1e-9);
}

TEST_CASE("TPA fit with one branch frozen reduces to a 1-parameter fit") {
  auto model = TpaModelParams::silicon(TpaVariant::PhysicalBose);
  model.branches[1].amplitude = 0.0;  // freeze TO at zero
  TpaModelParams truth = model;
  truth.branches[0].amplitude = 0.4;
  std::vector<std::pair<double, double>> points;
  for (double t : {10.0, 80.0, 160.0, 240.0, 320.0})
    points.emplace_back(t, tpa_coefficient_cm_per_gw(t, truth));
  const std::vector<bool> mask = {true, false};
  const auto fit = fit_tpa_constants(points, model, &mask);
  CHECK_THAT(fit.amplitudes[0], Catch::Matchers::WithinRel(0.4, 1e-9));
  CHECK(fit.amplitudes[1] == 0.0);
}

TEST_CASE("TPA fit degenerates when all points share a temperature") {
  const auto model = TpaModelParams::silicon();
  std::vector<std::pair<double, double>> points(5, {0.0, 0.42});
  CHECK_THROWS_AS(fit_tpa_constants(points, model), degenerate_fit);
}

TEST_CASE("Kerr fit recovers the published constants from the table values") {
  const std::vector<std::pair<double, double>> points = {{300.0, 5.18e-18},
                                                         {150.0, 4.03e-18},
                                                         {50.0, 3.86e-18},
                                                         {5.5, 3.86e-18},
                                                         {0.0, 3.86e-18}};
  const auto fit = fit_kerr_constants(points);
  CHECK_THAT(fit.n2_0_m2_per_w, Catch::Matchers::WithinRel(3.86e-18, 0.02));
  CHECK_THAT(fit.e_ph_over_kb_k, Catch::Matchers::WithinRel(576.0, 0.02));
  CHECK_THROWS_AS(fit_kerr_constants({{0.0, 3.86e-18}, {0.0, 3.9e-18}}), degenerate_fit);
}
