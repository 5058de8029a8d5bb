#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlwg/constants.hpp"
#include "nlwg/errors.hpp"
#include "nlwg/fitting.hpp"
#include "nlwg/materials.hpp"
#include "nlwg/phase_retrieval.hpp"
#include "nlwg/propagation.hpp"
#include "nlwg/pulse.hpp"
#include "nlwg/waveguide.hpp"

namespace nlwg {

using ordered_json = nlohmann::ordered_json;

/// Temperature-dependent FCA source: interpolation through a table by
/// default, or a Drude evaluation when the user supplies mobilities (the
/// Drude value is temperature-independent as configured).
struct FcaConfig {
  enum class Mode { Table, Drude };
  Mode mode = Mode::Table;
  FcaTable table = FcaTable::silicon_default();
  std::optional<FcaDrudeParams> drude;

  double sigma_at(double temperature_k) const {
    if (mode == Mode::Drude) {
      if (!drude) throw configuration_error("FCA drude mode selected without parameters");
      return fca_cross_section_m2(*drude);
    }
    return fca_lookup_m2(temperature_k, table);
  }
};

/// Optional explicit coefficient overrides; unset entries fall back to the
/// temperature models.
struct CoeffOverrides {
  std::optional<double> beta_tpa_cm_per_gw;
  std::optional<double> n2_m2_per_w;
  std::optional<double> sigma_fca_m2;
  std::optional<double> mu;
};

struct RunConfig {
  WaveguideSpec waveguide;
  LaserSpec laser;
  TemporalGrid grid;
  TemporalGrid fit_grid;      // coarser grid is acceptable for transmission fits
  SolverConfig solver;
  SolverConfig fit_solver;
  TpaModelParams tpa;
  KerrModelParams kerr;
  FcaConfig fca;
  double excess_loss_on = 1.0;   // switch transmittance eta_X
  double fiber_gamma_l = 0.0;    // fibre SPM gamma.L product [1/W]
  CoeffOverrides nonlinear;      // config-level coefficient overrides
  RetrievalConfig retrieval;
  std::optional<double> reference_power_mw;
  std::string retrieve_direction = "off";
  std::string output_dir = ".";

  std::string config_hash;       // FNV-1a of the canonical form
  ordered_json canonical;        // fully-defaulted configuration

  RunConfig()
      : waveguide(19.09e-3, units::loss_db_per_cm_to_per_m(2.4), 1e-13,
                  WaveguideSpec::chi_uniform(1e-13), 1e-9),
        laser(4.9e-12, 50e6, 1551.8e-9),
        grid(TemporalGrid::centered(4096, 64e-12)),
        fit_grid(grid),
        solver(),
        fit_solver(),
        tpa(TpaModelParams::silicon()),
        kerr(KerrModelParams::silicon()),
        fca() {}
};

namespace detail {

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

template <typename T>
T get_or(const ordered_json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw configuration_error(std::string("config key '") + key + "' has the wrong type");
  }
}

inline std::optional<double> opt_double(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number())
    throw configuration_error(std::string("config key '") + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace detail

/// Parses a configuration JSON object, applying documented defaults for every
/// missing key and validating referenced paths. The canonical (defaulted)
/// form and its hash are stored for provenance.
inline RunConfig parse_run_config(const ordered_json& j) {
  try {
    const ordered_json wg_j = j.value("waveguide", ordered_json::object());
    const double length = detail::get_or(wg_j, "length_mm", 19.09) * units::mm;
    const double loss_db = detail::get_or(wg_j, "linear_loss_db_per_cm", 2.4);
    const double a_eff = detail::get_or(wg_j, "a_eff_um2", 0.1) * units::um * units::um;
    const auto chi_opt = detail::opt_double(wg_j, "chi_per_m4");
    const double chi = chi_opt.value_or(WaveguideSpec::chi_uniform(a_eff));
    const double tau_c = detail::get_or(wg_j, "carrier_lifetime_ns", 1.0) * units::ns;
    WaveguideSpec waveguide(length, units::loss_db_per_cm_to_per_m(loss_db), a_eff, chi, tau_c);

    const ordered_json laser_j = j.value("laser", ordered_json::object());
    LaserSpec laser(detail::get_or(laser_j, "fwhm_ps", 4.9) * units::ps,
                    detail::get_or(laser_j, "rep_rate_mhz", 50.0) * units::mhz,
                    detail::get_or(laser_j, "wavelength_nm", 1551.8) * units::nm);
    const std::string shape = detail::get_or<std::string>(laser_j, "shape", "sech2");
    if (shape != "sech2") throw configuration_error("laser.shape: only 'sech2' is supported");

    const ordered_json grid_j = j.value("grid", ordered_json::object());
    TemporalGrid grid = TemporalGrid::centered(detail::get_or(grid_j, "n_samples", 4096),
                                               detail::get_or(grid_j, "window_ps", 64.0) * units::ps);
    TemporalGrid fit_grid = grid;
    if (j.contains("fit_grid")) {
      const ordered_json fg = j.at("fit_grid");
      fit_grid = TemporalGrid::centered(detail::get_or(fg, "n_samples", grid.n_samples()),
                                        detail::get_or(fg, "window_ps", grid.window() / units::ps) *
                                            units::ps);
    }

    auto parse_solver = [](const ordered_json& s) {
      return SolverConfig(detail::get_or(s, "dz_um", 10.0) * units::um,
                          detail::get_or(s, "max_step_halvings", 6),
                          detail::get_or(s, "tol", 1e-5),
                          detail::get_or(s, "preload_carriers_per_m3", 0.0));
    };
    SolverConfig solver = parse_solver(j.value("solver", ordered_json::object()));
    SolverConfig fit_solver =
        j.contains("fit_solver") ? parse_solver(j.at("fit_solver")) : solver;

    const ordered_json mat = j.value("materials", ordered_json::object());
    const ordered_json tpa_j = mat.value("tpa", ordered_json::object());
    const std::string variant_str =
        detail::get_or<std::string>(tpa_j, "variant", "physical_bose");
    TpaVariant variant;
    if (variant_str == "physical_bose")
      variant = TpaVariant::PhysicalBose;
    else if (variant_str == "as_printed")
      variant = TpaVariant::AsPrinted;
    else
      throw configuration_error("materials.tpa.variant must be physical_bose or as_printed");
    const ordered_json var_j = tpa_j.value("varshni", ordered_json::object());
    VarshniParams varshni(detail::get_or(var_j, "e_gap0_ev", 1.156),
                          detail::get_or(var_j, "beta_ev_per_K", 7.021e-4),
                          detail::get_or(var_j, "delta_K", 1108.0));
    const double kb = constants::k_boltzmann_ev;
    TpaModelParams tpa({{"TA", detail::get_or(tpa_j, "e_ph_ta_K", 212.0) * kb,
                         detail::get_or(tpa_j, "k_ta", 0.233)},
                        {"TO", detail::get_or(tpa_j, "e_ph_to_K", 670.0) * kb,
                         detail::get_or(tpa_j, "k_to", 2.138)}},
                       detail::get_or(tpa_j, "photon_energy_ev", 0.797), varshni, variant);

    const ordered_json kerr_j = mat.value("kerr", ordered_json::object());
    KerrModelParams kerr(detail::get_or(kerr_j, "n2_0_m2_per_w", 3.86e-18),
                         detail::get_or(kerr_j, "e_ph_over_kb_K", 576.0));

    FcaConfig fca;
    if (mat.contains("fca")) {
      const ordered_json fca_j = mat.at("fca");
      const std::string mode = detail::get_or<std::string>(fca_j, "mode", "table");
      if (mode == "table") {
        fca.mode = FcaConfig::Mode::Table;
        if (fca_j.contains("table")) {
          std::vector<std::pair<double, double>> pts;
          for (const auto& row : fca_j.at("table")) {
            if (!row.is_array() || row.size() != 2)
              throw configuration_error("materials.fca.table rows must be [T, sigma]");
            pts.emplace_back(row[0].get<double>(), row[1].get<double>());
          }
          fca.table = FcaTable(std::move(pts));
        }
      } else if (mode == "drude") {
        fca.mode = FcaConfig::Mode::Drude;
        fca.drude = FcaDrudeParams(
            detail::get_or(fca_j, "wavelength_nm", 1551.8) * units::nm,
            detail::get_or(fca_j, "refractive_index", 3.48), detail::get_or(fca_j, "m_e_rel", 0.3),
            detail::get_or(fca_j, "m_h_rel", 0.4), detail::get_or(fca_j, "mu_e_m2_per_vs", 0.03),
            detail::get_or(fca_j, "mu_h_m2_per_vs", 0.01));
      } else {
        throw configuration_error("materials.fca.mode must be table or drude");
      }
    }

    const ordered_json coupling = j.value("coupling", ordered_json::object());
    const double excess_db = detail::get_or(coupling, "excess_loss_on_db", 0.0);
    if (excess_db < 0.0) throw configuration_error("coupling.excess_loss_on_db must be >= 0");

    const ordered_json fiber = j.value("fiber", ordered_json::object());
    const double fiber_gamma_l = detail::get_or(fiber, "gamma_l_per_w", 0.0);
    if (fiber_gamma_l < 0.0) throw configuration_error("fiber.gamma_l_per_w must be >= 0");

    CoeffOverrides overrides;
    if (j.contains("nonlinear")) {
      const ordered_json nl = j.at("nonlinear");
      overrides.beta_tpa_cm_per_gw = detail::opt_double(nl, "beta_tpa_cm_per_gw");
      overrides.n2_m2_per_w = detail::opt_double(nl, "n2_m2_per_w");
      overrides.sigma_fca_m2 = detail::opt_double(nl, "sigma_fca_m2");
      overrides.mu = detail::opt_double(nl, "mu");
    }

    const ordered_json retr = j.value("retrieval", ordered_json::object());
    const std::string init = detail::get_or<std::string>(retr, "init_phase", "zero");
    if (init != "zero" && init != "quadratic")
      throw configuration_error("retrieval.init_phase must be zero or quadratic");
    RetrievalConfig retrieval(detail::get_or(retr, "max_iters", 500),
                              detail::get_or(retr, "err_tol", 1e-6),
                              init == "zero" ? InitPhase::Zero : InitPhase::Quadratic,
                              detail::get_or(retr, "quadratic_curvature", 0.0));
    std::optional<double> ref_power = detail::opt_double(retr, "reference_power_mw");
    const std::string direction = detail::get_or<std::string>(retr, "direction", "off");
    if (direction != "on" && direction != "off")
      throw configuration_error("retrieval.direction must be on or off");

    if (j.contains("paths")) {
      for (const auto& [key, value] : j.at("paths").items()) {
        if (!value.is_string()) throw configuration_error("paths entries must be strings");
        if (!std::filesystem::exists(value.get<std::string>()))
          throw configuration_error("paths." + key + " does not exist: " +
                                    value.get<std::string>());
      }
    }

    RunConfig cfg;
    cfg.waveguide = waveguide;
    cfg.laser = laser;
    cfg.grid = grid;
    cfg.fit_grid = fit_grid;
    cfg.solver = solver;
    cfg.fit_solver = fit_solver;
    cfg.tpa = tpa;
    cfg.kerr = kerr;
    cfg.fca = fca;
    cfg.excess_loss_on = units::db_to_transmittance(excess_db);
    cfg.fiber_gamma_l = fiber_gamma_l;
    cfg.nonlinear = overrides;
    cfg.retrieval = retrieval;
    cfg.reference_power_mw = ref_power;
    cfg.retrieve_direction = direction;
    cfg.output_dir = detail::get_or<std::string>(j, "output_dir", ".");

    // Canonical form: the input document with every default materialised.
    ordered_json canon;
    canon["waveguide"] = {{"length_mm", length / units::mm},
                          {"linear_loss_db_per_cm", loss_db},
                          {"a_eff_um2", a_eff / (units::um * units::um)},
                          {"chi_per_m4", chi},
                          {"carrier_lifetime_ns", tau_c / units::ns}};
    canon["laser"] = {{"fwhm_ps", laser.fwhm / units::ps},
                      {"rep_rate_mhz", laser.rep_rate / units::mhz},
                      {"wavelength_nm", laser.wavelength / units::nm},
                      {"shape", "sech2"}};
    canon["grid"] = {{"n_samples", grid.n_samples()}, {"window_ps", grid.window() / units::ps}};
    canon["fit_grid"] = {{"n_samples", fit_grid.n_samples()},
                         {"window_ps", fit_grid.window() / units::ps}};
    canon["solver"] = {{"dz_um", solver.dz / units::um},
                       {"max_step_halvings", solver.max_step_halvings},
                       {"tol", solver.tol},
                       {"preload_carriers_per_m3", solver.preload_carriers}};
    canon["fit_solver"] = {{"dz_um", fit_solver.dz / units::um},
                           {"max_step_halvings", fit_solver.max_step_halvings},
                           {"tol", fit_solver.tol},
                           {"preload_carriers_per_m3", fit_solver.preload_carriers}};
    canon["materials"]["tpa"] = {{"k_ta", tpa.branches[0].amplitude},
                                 {"k_to", tpa.branches[1].amplitude},
                                 {"e_ph_ta_K", tpa.branches[0].e_ph_ev / kb},
                                 {"e_ph_to_K", tpa.branches[1].e_ph_ev / kb},
                                 {"photon_energy_ev", tpa.photon_energy_ev},
                                 {"variant", variant_str},
                                 {"varshni",
                                  {{"e_gap0_ev", varshni.e_gap_0_ev},
                                   {"beta_ev_per_K", varshni.beta_ev_per_k},
                                   {"delta_K", varshni.delta_k}}}};
    canon["materials"]["kerr"] = {{"n2_0_m2_per_w", kerr.n2_0_m2_per_w},
                                  {"e_ph_over_kb_K", kerr.e_ph_over_kb_k}};
    if (fca.mode == FcaConfig::Mode::Table) {
      ordered_json pts = ordered_json::array();
      for (const auto& [t, s] : fca.table.points()) pts.push_back({t, s});
      canon["materials"]["fca"] = {{"mode", "table"}, {"table", pts}};
    } else {
      canon["materials"]["fca"] = {{"mode", "drude"},
                                   {"wavelength_nm", fca.drude->wavelength_m / units::nm},
                                   {"refractive_index", fca.drude->refractive_index},
                                   {"m_e_rel", fca.drude->m_e_rel},
                                   {"m_h_rel", fca.drude->m_h_rel},
                                   {"mu_e_m2_per_vs", fca.drude->mu_e},
                                   {"mu_h_m2_per_vs", fca.drude->mu_h}};
    }
    canon["coupling"] = {{"excess_loss_on_db", excess_db}};
    canon["fiber"] = {{"gamma_l_per_w", fiber_gamma_l}};
    canon["nonlinear"] = ordered_json::object();
    auto put_opt = [&](const char* key, const std::optional<double>& v) {
      canon["nonlinear"][key] = v ? ordered_json(*v) : ordered_json(nullptr);
    };
    put_opt("beta_tpa_cm_per_gw", overrides.beta_tpa_cm_per_gw);
    put_opt("n2_m2_per_w", overrides.n2_m2_per_w);
    put_opt("sigma_fca_m2", overrides.sigma_fca_m2);
    put_opt("mu", overrides.mu);
    canon["retrieval"] = {{"max_iters", retrieval.max_iters},
                          {"err_tol", retrieval.err_tol},
                          {"init_phase", init},
                          {"quadratic_curvature", retrieval.quadratic_curvature},
                          {"direction", direction}};
    canon["retrieval"]["reference_power_mw"] =
        ref_power ? ordered_json(*ref_power) : ordered_json(nullptr);
    canon["output_dir"] = cfg.output_dir;

    cfg.canonical = canon;
    cfg.config_hash = detail::fnv1a_hex(canon.dump());
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw configuration_error(std::string("invalid configuration: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw configuration_error("cannot open config file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("config JSON: ") + e.what(), 0);
  }
  return parse_run_config(j);
}

/// Coefficients for a run: CLI override > config override > temperature model.
inline NonlinearCoeffs resolve_coeffs(const RunConfig& cfg, std::optional<double> temperature_k,
                                      const CoeffOverrides& cli = {}) {
  auto pick = [&](const std::optional<double>& a, const std::optional<double>& b,
                  auto&& model, const char* what) {
    if (a) return *a;
    if (b) return *b;
    if (!temperature_k)
      throw configuration_error(std::string("no explicit value for ") + what +
                                " and no temperature given for the model");
    return model(*temperature_k);
  };
  const double beta_cm_gw =
      pick(cli.beta_tpa_cm_per_gw, cfg.nonlinear.beta_tpa_cm_per_gw,
           [&](double t) { return tpa_coefficient_cm_per_gw(t, cfg.tpa); }, "beta_tpa");
  const double n2 = pick(cli.n2_m2_per_w, cfg.nonlinear.n2_m2_per_w,
                         [&](double t) { return kerr_coefficient_m2_per_w(t, cfg.kerr); }, "n2");
  const double sigma = pick(cli.sigma_fca_m2, cfg.nonlinear.sigma_fca_m2,
                            [&](double t) { return cfg.fca.sigma_at(t); }, "sigma_fca");
  const double mu = cli.mu ? *cli.mu : cfg.nonlinear.mu.value_or(0.0);
  return NonlinearCoeffs(n2, units::tpa_cm_per_gw_to_m_per_w(beta_cm_gw), sigma, mu);
}

}  // namespace nlwg
