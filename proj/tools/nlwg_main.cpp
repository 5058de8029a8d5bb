// Batch CLI for the nonlinear-waveguide toolkit: simulation, transmission and
// phase fitting, phase retrieval, material tables and heralding estimates.
//
// Exit codes: 0 success, 2 parse/config error, 3 fit failure,
// 4 solver non-convergence.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlwg/nlwg.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_fit = 3;
constexpr int exit_solver = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  unsigned workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration JSON")->required();
  cmd->add_option("-o,--out", args.out_dir, "output directory");
  cmd->add_option("--workers", args.workers, "worker threads for independent sweeps")
      ->check(CLI::PositiveNumber);
}

std::optional<double> opt_of(const CLI::Option* o, double value) {
  return o->count() > 0 ? std::optional<double>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonlinear silicon waveguide modelling and characterisation"};
  app.require_subcommand(1);

  // simulate -------------------------------------------------------------
  CommonArgs sim_common;
  double sim_avg_mw = 0, sim_peak_w = 0, sim_temp = 0;
  double sim_beta = 0, sim_n2 = 0, sim_sigma = 0, sim_mu = 0, sim_fiber_mw = 0;
  std::vector<double> sim_sweep;
  auto* sim = app.add_subcommand("simulate", "propagate a pulse or sweep a power curve");
  add_common(sim, sim_common);
  auto* o_avg = sim->add_option("--avg-power-mw", sim_avg_mw, "in-waveguide average power [mW]");
  auto* o_peak = sim->add_option("--peak-power-w", sim_peak_w, "in-waveguide peak power [W]");
  auto* o_temp = sim->add_option("--temperature", sim_temp, "temperature for the material models [K]");
  auto* o_beta = sim->add_option("--beta-tpa-cm-gw", sim_beta, "override beta_TPA [cm/GW]");
  auto* o_n2 = sim->add_option("--n2", sim_n2, "override n2 [m^2/W]");
  auto* o_sigma = sim->add_option("--sigma-fca", sim_sigma, "override sigma_FCA [m^2]");
  auto* o_mu = sim->add_option("--mu", sim_mu, "override FCD strength mu");
  auto* o_fiber = sim->add_option("--fiber-launch-mw", sim_fiber_mw,
                                  "fibre-launched average power for the SPM background [mW]");
  sim->add_option("--sweep-mw", sim_sweep, "average powers for an inverse-transmission sweep [mW]");

  // fit-transmission -------------------------------------------------------
  CommonArgs fit_common;
  std::vector<std::string> scan_files;
  auto* fit = app.add_subcommand("fit-transmission", "fit inverse-transmission power scans");
  add_common(fit, fit_common);
  fit->add_option("--scans", scan_files, "scan CSV file(s)")->required();

  // retrieve-phase ----------------------------------------------------------
  CommonArgs retr_common;
  std::string spectra_dir, retr_fit_json;
  double retr_temp = 0;
  auto* retr = app.add_subcommand("retrieve-phase", "Gerchberg-Saxton phase retrieval of spectra");
  add_common(retr, retr_common);
  retr->add_option("--spectra", spectra_dir, "directory of spec_<power>mW.txt files")->required();
  retr->add_option("--fit", retr_fit_json, "transmission_fit.json from fit-transmission")
      ->required();
  auto* o_retr_temp = retr->add_option("--temperature", retr_temp, "temperature to select [K]");

  // fit-phase ----------------------------------------------------------------
  CommonArgs ph_common;
  std::string phases_dir, ph_fit_json;
  double ph_temp = 0;
  auto* ph = app.add_subcommand("fit-phase", "fit gamma and mu to retrieved phase profiles");
  add_common(ph, ph_common);
  ph->add_option("--phases", phases_dir, "directory of phase_<power>mW.txt files")->required();
  ph->add_option("--fit", ph_fit_json, "transmission_fit.json from fit-transmission")->required();
  auto* o_ph_temp = ph->add_option("--temperature", ph_temp, "temperature to select [K]");

  // material -------------------------------------------------------------------
  CommonArgs mat_common;
  std::vector<double> mat_temps;
  double mat_beta = 0;
  auto* mat = app.add_subcommand("material", "tabulate the temperature-dependent models");
  add_common(mat, mat_common);
  mat->add_option("--temperatures", mat_temps, "temperatures [K]")->required();
  auto* o_mat_beta = mat->add_option("--beta-tpa-cm-gw", mat_beta,
                                     "override beta_TPA in every row [cm/GW]");

  // herald ------------------------------------------------------------------------
  CommonArgs her_common;
  double her_p = 0.05, her_purity = 0.9, her_fom = 0, her_temp = 0;
  auto* her = app.add_subcommand("herald", "photon-pair source heralding estimate");
  add_common(her, her_common);
  her->add_option("--p-pair", her_p, "pairs per pulse")->required();
  her->add_option("--purity", her_purity, "heralded-photon purity")->required();
  auto* o_her_fom = her->add_option("--fom", her_fom, "nonlinear figure of merit");
  auto* o_her_temp = her->add_option("--temperature", her_temp, "derive the FOM at this T [K]");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const nlwg::RunConfig cfg = nlwg::load_run_config(sim_common.config_path);
      nlwg::pipeline::SimulateOptions opt;
      if (o_avg->count()) opt.avg_power_w = sim_avg_mw * nlwg::units::mw;
      opt.peak_power_w = opt_of(o_peak, sim_peak_w);
      opt.temperature_k = opt_of(o_temp, sim_temp);
      opt.overrides.beta_tpa_cm_per_gw = opt_of(o_beta, sim_beta);
      opt.overrides.n2_m2_per_w = opt_of(o_n2, sim_n2);
      opt.overrides.sigma_fca_m2 = opt_of(o_sigma, sim_sigma);
      opt.overrides.mu = opt_of(o_mu, sim_mu);
      if (o_fiber->count()) opt.fiber_launch_avg_w = sim_fiber_mw * nlwg::units::mw;
      for (double p : sim_sweep) opt.sweep_avg_powers_w.push_back(p * nlwg::units::mw);
      opt.out_dir = sim_common.out_dir;
      opt.workers = sim_common.workers;
      const auto summary = nlwg::pipeline::cmd_simulate(cfg, opt);
      if (summary["mode"] == "pulse")
        std::cout << "transmission " << summary["transmission"] << ", peak in "
                  << summary["peak_power_in_w"] << " W, peak out " << summary["peak_power_out_w"]
                  << " W\n";
      else
        std::cout << "sweep of " << summary["points"] << " powers written\n";
    } else if (*fit) {
      const nlwg::RunConfig cfg = nlwg::load_run_config(fit_common.config_path);
      nlwg::pipeline::FitTransmissionOptions opt;
      opt.scan_files = scan_files;
      opt.out_dir = fit_common.out_dir;
      opt.workers = fit_common.workers;
      const auto summary = nlwg::pipeline::cmd_fit_transmission(cfg, opt);
      for (const auto& row : summary["series"])
        std::cout << "T = " << row["temperature_K"] << " K: beta_TPA = "
                  << row["beta_mean_cm_per_gw"] << " cm/GW\n";
    } else if (*retr) {
      const nlwg::RunConfig cfg = nlwg::load_run_config(retr_common.config_path);
      nlwg::pipeline::RetrievePhaseOptions opt;
      opt.spectra_dir = spectra_dir;
      opt.fit_json_path = retr_fit_json;
      opt.out_dir = retr_common.out_dir;
      opt.temperature_k = opt_of(o_retr_temp, retr_temp);
      opt.workers = retr_common.workers;
      const auto summary = nlwg::pipeline::cmd_retrieve_phase(cfg, opt);
      std::cout << summary["per_power"].size() << " phases retrieved (reference "
                << summary["reference_power_mw"] << " mW)\n";
    } else if (*ph) {
      const nlwg::RunConfig cfg = nlwg::load_run_config(ph_common.config_path);
      nlwg::pipeline::FitPhaseOptions opt;
      opt.phases_dir = phases_dir;
      opt.fit_json_path = ph_fit_json;
      opt.out_dir = ph_common.out_dir;
      opt.temperature_k = opt_of(o_ph_temp, ph_temp);
      opt.workers = ph_common.workers;
      const auto summary = nlwg::pipeline::cmd_fit_phase(cfg, opt);
      std::cout << "n2 = " << summary["n2_mean_m2_per_w"] << " m^2/W at "
                << summary["temperature_K"] << " K\n";
    } else if (*mat) {
      const nlwg::RunConfig cfg = nlwg::load_run_config(mat_common.config_path);
      nlwg::pipeline::MaterialOptions opt;
      opt.temperatures = mat_temps;
      opt.beta_override_cm_gw = opt_of(o_mat_beta, mat_beta);
      opt.out_dir = mat_common.out_dir;
      const auto summary = nlwg::pipeline::cmd_material(cfg, opt);
      for (const auto& row : summary["rows"])
        std::cout << row["temperature_K"] << " K: beta " << row["beta_tpa_cm_per_gw"]
                  << " cm/GW, n2 " << row["n2_nm2_per_w"] << " nm^2/W, FOM " << row["fom"]
                  << "\n";
    } else if (*her) {
      const nlwg::RunConfig cfg = nlwg::load_run_config(her_common.config_path);
      nlwg::pipeline::HeraldOptions opt;
      opt.p_pair = her_p;
      opt.purity = her_purity;
      opt.fom = opt_of(o_her_fom, her_fom);
      opt.temperature_k = opt_of(o_her_temp, her_temp);
      opt.out_dir = her_common.out_dir;
      const auto summary = nlwg::pipeline::cmd_herald(cfg, opt);
      std::cout << "FOM " << summary["fom"] << " (" << summary["fom_source"].get<std::string>()
                << "): xi = " << summary["xi"] << ", heralding = "
                << summary["heralding_efficiency"] << ", gamma.L.P = " << summary["gamma_lp"]
                << "\n";
    }
  } catch (const nlwg::convergence_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver;
  } catch (const nlwg::instability_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver;
  } catch (const nlwg::fit_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_fit;
  } catch (const nlwg::degenerate_fit& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_fit;
  } catch (const nlwg::nothing_to_fit& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_fit;
  } catch (const nlwg::data_inconsistent& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_fit;
  } catch (const nlwg::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const nlwg::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const nlwg::configuration_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const nlwg::aliasing_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_ok;
}
