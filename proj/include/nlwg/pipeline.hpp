#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlwg/config.hpp"
#include "nlwg/fft.hpp"
#include "nlwg/fitting.hpp"
#include "nlwg/io.hpp"
#include "nlwg/materials.hpp"
#include "nlwg/phase_retrieval.hpp"
#include "nlwg/propagation.hpp"

namespace nlwg {
namespace pipeline {

namespace fs = std::filesystem;

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw configuration_error("cannot create output directory: " + dir);
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

inline void write_json(const std::string& path, const ordered_json& j) {
  auto out = io::detail::open_out(path);
  out << j.dump(2) << "\n";
}

inline ordered_json provenance(const RunConfig& cfg) {
  ordered_json p;
  p["tool"] = "nlwg";
  p["schema_version"] = 1;
  p["config_hash"] = cfg.config_hash;
  p["tpa_variant"] =
      cfg.tpa.variant == TpaVariant::PhysicalBose ? "physical_bose" : "as_printed";
  p["solver"] = {{"dz_um", cfg.solver.dz / units::um},
                 {"tol", cfg.solver.tol},
                 {"max_step_halvings", cfg.solver.max_step_halvings}};
  return p;
}

/// Spectrum of the complex envelope sqrt(P) e^{i phi} on the pulse grid,
/// returned as (ascending wavelengths, linear PSD). Bin k at frequency offset
/// f_k maps to wavelength c / (c/lambda_c + f_k).
inline std::pair<std::vector<double>, std::vector<double>> synthesize_spectrum(
    const TemporalGrid& grid, const std::vector<double>& power, const std::vector<double>& phase,
    double center_wavelength) {
  const auto n = static_cast<std::size_t>(grid.n_samples());
  std::vector<std::complex<double>> field(n);
  for (std::size_t i = 0; i < n; ++i) field[i] = std::polar(std::sqrt(power[i]), phase[i]);
  fft_inplace(field, false);
  const double nu_c = constants::speed_of_light / center_wavelength;
  std::vector<std::pair<double, double>> rows;
  rows.reserve(n);
  for (int k = 0; k < grid.n_samples(); ++k) {
    const double f = grid.angular_frequency(k) / (2.0 * std::numbers::pi);
    const double wl = constants::speed_of_light / (nu_c + f);
    const double a = std::abs(field[static_cast<std::size_t>(k)]);
    rows.emplace_back(wl, a * a);
  }
  std::sort(rows.begin(), rows.end());
  std::vector<double> wl(n), psd(n);
  for (std::size_t i = 0; i < n; ++i) {
    wl[i] = rows[i].first;
    psd[i] = rows[i].second;
  }
  return {std::move(wl), std::move(psd)};
}

struct BidirectionalEntry {
  double temperature;
  double alpha_tpa_true;
  std::optional<double> sigma_fca_true;
  double eta_l;
  double eta_r;
};

inline BidirectionalEntry pick_bidirectional(const ordered_json& fit_json,
                                             std::optional<double> temperature) {
  if (!fit_json.contains("bidirectional") || fit_json.at("bidirectional").empty())
    throw configuration_error("transmission fit JSON carries no bidirectional results");
  const auto& list = fit_json.at("bidirectional");
  const ordered_json* chosen = nullptr;
  if (!temperature) {
    if (list.size() != 1)
      throw configuration_error(
          "transmission fit JSON has several temperatures; pass one explicitly");
    chosen = &list.front();
  } else {
    for (const auto& entry : list) {
      const double t = entry.at("temperature_K").get<double>();
      if (std::abs(t - *temperature) <= 1e-6 * std::max(1.0, std::abs(*temperature))) {
        chosen = &entry;
        break;
      }
    }
    if (!chosen) throw configuration_error("no bidirectional result at the requested temperature");
  }
  BidirectionalEntry e;
  e.temperature = chosen->at("temperature_K").get<double>();
  e.alpha_tpa_true = chosen->at("alpha_tpa_true_per_wm").get<double>();
  if (chosen->contains("sigma_fca_m2") && !chosen->at("sigma_fca_m2").is_null())
    e.sigma_fca_true = chosen->at("sigma_fca_m2").get<double>();
  e.eta_l = chosen->at("eta_l").get<double>();
  e.eta_r = chosen->at("eta_r").get<double>();
  return e;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::optional<double> avg_power_w;   // in-waveguide average power
  std::optional<double> peak_power_w;  // in-waveguide peak power
  std::optional<double> temperature_k;
  CoeffOverrides overrides;
  std::optional<double> fiber_launch_avg_w;  // fibre average power for the background phase
  std::vector<double> sweep_avg_powers_w;    // sweep mode when non-empty
  std::string out_dir = ".";
  unsigned workers = 1;
};

/// Single-pulse simulation (output pulse, spectrum, S/T table) or an
/// inverse-transmission sweep. Deterministic files plus a JSON summary with
/// convergence metadata.
inline ordered_json cmd_simulate(const RunConfig& cfg, const SimulateOptions& opt) {
  detail::ensure_dir(opt.out_dir);
  const NonlinearCoeffs nl = resolve_coeffs(cfg, opt.temperature_k, opt.overrides);

  ordered_json summary;
  summary["command"] = "simulate";
  summary["coefficients"] = {
      {"beta_tpa_cm_per_gw", units::tpa_m_per_w_to_cm_per_gw(nl.beta_tpa)},
      {"n2_m2_per_w", nl.n2},
      {"sigma_fca_m2", nl.sigma_fca},
      {"mu", nl.mu}};
  if (opt.temperature_k) summary["temperature_K"] = *opt.temperature_k;

  if (!opt.sweep_avg_powers_w.empty()) {
    const auto curve = transmission_curve(opt.sweep_avg_powers_w, cfg.grid, cfg.laser,
                                          cfg.waveguide, nl, cfg.solver, opt.workers);
    auto out = io::detail::open_out(detail::join(opt.out_dir, "inverse_transmission.csv"));
    out << "p_in_mW,inv_transmission\n";
    for (const auto& [p, inv_t] : curve) out << p / units::mw << ',' << inv_t << "\n";
    summary["mode"] = "sweep";
    summary["points"] = curve.size();
    summary["files"] = {detail::join(opt.out_dir, "inverse_transmission.csv")};
    summary["provenance"] = detail::provenance(cfg);
    detail::write_json(detail::join(opt.out_dir, "summary.json"), summary);
    return summary;
  }

  if (!opt.avg_power_w && !opt.peak_power_w)
    throw configuration_error("simulate: need an average power, a peak power, or a sweep");
  const double peak =
      opt.peak_power_w ? *opt.peak_power_w : peak_from_average(*opt.avg_power_w, cfg.laser);
  const auto pulse = sech2_pulse(cfg.grid, peak, cfg.laser.fwhm);
  const auto res = propagate(pulse, cfg.laser, cfg.waveguide, nl, cfg.solver);

  // Total phase entering the spectrum; an upstream-fibre SPM background is
  // additive because the chip's power evolution is phase-independent.
  std::vector<double> total_phase = res.output.phase;
  const bool fiber_included = opt.fiber_launch_avg_w.has_value() && cfg.fiber_gamma_l > 0.0;
  if (fiber_included) {
    const auto launched =
        sech2_pulse(cfg.grid, peak_from_average(*opt.fiber_launch_avg_w, cfg.laser),
                    cfg.laser.fwhm);
    for (std::size_t i = 0; i < total_phase.size(); ++i)
      total_phase[i] += cfg.fiber_gamma_l * launched.power[i];
  }

  const auto [wl, psd] =
      detail::synthesize_spectrum(cfg.grid, res.output.power, total_phase, cfg.laser.wavelength);
  const double rbw = cfg.laser.wavelength * cfg.laser.wavelength /
                     (constants::speed_of_light * cfg.grid.window());

  {
    auto out = io::detail::open_out(detail::join(opt.out_dir, "output_pulse.txt"));
    out << "# columns: tau_ps power_w phase_rad\n";
    for (int i = 0; i < cfg.grid.n_samples(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      out << cfg.grid.time(i) / units::ps << ' ' << res.output.power[k] << ' ' << total_phase[k]
          << "\n";
    }
  }
  io::write_spectrum(detail::join(opt.out_dir, "spectrum.txt"), wl, psd, rbw);
  io::write_st_table(detail::join(opt.out_dir, "st_table.txt"),
                     StTable{cfg.grid, peak, nl.alpha_tpa(cfg.waveguide.a_eff), nl.sigma_fca,
                             res.s_table, res.t_table, res.output.power},
                     cfg.waveguide);

  summary["mode"] = "pulse";
  summary["peak_power_in_w"] = peak;
  summary["avg_power_in_w"] = average_from_peak(peak, cfg.laser);
  summary["peak_power_out_w"] = res.output.peak_power();
  summary["pulse_energy_in_j"] = pulse_energy(pulse);
  summary["pulse_energy_out_j"] = pulse_energy(res.output);
  summary["transmission"] = res.transmission;
  summary["inverse_transmission"] = 1.0 / res.transmission;
  summary["step_count"] = res.step_count;
  summary["convergence_estimate"] = res.convergence_estimate;
  summary["fiber_phase_included"] = fiber_included;
  summary["files"] = {detail::join(opt.out_dir, "output_pulse.txt"),
                      detail::join(opt.out_dir, "spectrum.txt"),
                      detail::join(opt.out_dir, "st_table.txt")};
  summary["provenance"] = detail::provenance(cfg);
  detail::write_json(detail::join(opt.out_dir, "summary.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// fit-transmission
// ---------------------------------------------------------------------------

struct FitTransmissionOptions {
  std::vector<std::string> scan_files;
  std::string out_dir = ".";
  unsigned workers = 1;
};

/// Fits every directional scan, combines on/off pairs per (file, temperature)
/// into true TPA parameters and per-coupler losses, and aggregates the
/// temperature series.
inline ordered_json cmd_fit_transmission(const RunConfig& cfg, const FitTransmissionOptions& opt) {
  if (opt.scan_files.empty()) throw configuration_error("fit-transmission: no scan files given");
  detail::ensure_dir(opt.out_dir);

  struct Job {
    std::string file;
    PowerScan scan;
  };
  std::vector<Job> jobs;
  for (const auto& file : opt.scan_files) {
    for (auto& scan : io::load_scan_set(file, cfg.excess_loss_on))
      jobs.push_back({file, std::move(scan)});
  }

  std::vector<TransmissionFit> fits(jobs.size(),
                                    TransmissionFit{0, 0, 0, 0, 0, 0, 0, Direction::Off, 0});
  nlwg::detail::parallel_for_index(jobs.size(), opt.workers, [&](std::size_t i) {
    const auto& scan = jobs[i].scan;
    fits[i] = fit_inverse_transmission(scan, cfg.fit_grid, cfg.laser, cfg.waveguide,
                                       cfg.fca.sigma_at(scan.temperature), cfg.fit_solver);
  });

  ordered_json per_scan = ordered_json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& f = fits[i];
    per_scan.push_back({{"file", jobs[i].file},
                        {"direction", to_string(f.direction)},
                        {"temperature_K", f.temperature},
                        {"alpha_per_m", f.alpha},
                        {"alpha_tpa_apparent_per_wm", f.alpha_tpa_apparent},
                        {"coupler_mean", f.coupler_mean},
                        {"intercept", f.intercept},
                        {"residual_rms", f.residual_rms},
                        {"covariance", f.covariance},
                        {"sigma_fca_m2", f.sigma_fca_assumed},
                        {"samples", jobs[i].scan.samples.size()}});
  }

  // Pair on/off fits per (file, temperature).
  std::vector<BidirectionalResult> combined;
  ordered_json unpaired = ordered_json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (fits[i].direction != Direction::On) continue;
    bool paired = false;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (k == i || jobs[k].file != jobs[i].file) continue;
      if (fits[k].direction == Direction::Off && fits[k].temperature == fits[i].temperature) {
        combined.push_back(combine_bidirectional(fits[i], fits[k]));
        paired = true;
        break;
      }
    }
    if (!paired)
      unpaired.push_back({{"file", jobs[i].file},
                          {"direction", "on"},
                          {"temperature_K", fits[i].temperature}});
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (fits[i].direction != Direction::Off) continue;
    bool paired = false;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (k == i || jobs[k].file != jobs[i].file) continue;
      if (fits[k].direction == Direction::On && fits[k].temperature == fits[i].temperature)
        paired = true;
    }
    if (!paired)
      unpaired.push_back({{"file", jobs[i].file},
                          {"direction", "off"},
                          {"temperature_K", fits[i].temperature}});
  }
  if (combined.empty())
    throw nothing_to_fit("fit-transmission: no on/off scan pairs found in the input");

  std::sort(combined.begin(), combined.end(),
            [](const auto& a, const auto& b) { return a.temperature < b.temperature; });

  ordered_json bidi = ordered_json::array();
  std::vector<std::pair<double, double>> beta_series;
  for (const auto& c : combined) {
    const double beta_cm_gw =
        units::tpa_m_per_w_to_cm_per_gw(c.alpha_tpa_true * cfg.waveguide.a_eff);
    beta_series.emplace_back(c.temperature, beta_cm_gw);
    ordered_json entry = {{"temperature_K", c.temperature},
                          {"alpha_tpa_true_per_wm", c.alpha_tpa_true},
                          {"beta_tpa_cm_per_gw", beta_cm_gw},
                          {"eta_l", c.eta_l},
                          {"eta_r", c.eta_r},
                          {"eta_l_db", units::transmittance_to_db(c.eta_l)},
                          {"eta_r_db", units::transmittance_to_db(c.eta_r)},
                          {"coupler_mean", c.coupler_mean}};
    entry["sigma_fca_m2"] =
        c.sigma_fca_true ? ordered_json(*c.sigma_fca_true) : ordered_json(nullptr);
    bidi.push_back(std::move(entry));
  }

  const TemperatureSeries series = aggregate_series(beta_series);
  ordered_json series_json = ordered_json::array();
  {
    auto csv = io::detail::open_out(detail::join(opt.out_dir, "series.csv"));
    csv << "temperature_K,beta_tpa_cm_per_gw,std_cm_per_gw\n";
    for (const auto& e : series.entries) {
      csv << e.temperature << ',' << e.mean << ',';
      if (e.spread_defined) csv << e.std_dev;
      csv << "\n";
      series_json.push_back({{"temperature_K", e.temperature},
                             {"beta_mean_cm_per_gw", e.mean},
                             {"beta_std_cm_per_gw", e.spread_defined ? ordered_json(e.std_dev)
                                                                     : ordered_json(nullptr)},
                             {"count", e.count},
                             {"spread_defined", e.spread_defined}});
    }
  }

  ordered_json summary;
  summary["command"] = "fit-transmission";
  summary["per_scan"] = per_scan;
  summary["bidirectional"] = bidi;
  summary["unpaired"] = unpaired;
  summary["series"] = series_json;
  summary["provenance"] = detail::provenance(cfg);
  detail::write_json(detail::join(opt.out_dir, "transmission_fit.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// retrieve-phase
// ---------------------------------------------------------------------------

struct RetrievePhaseOptions {
  std::string spectra_dir;
  std::string fit_json_path;
  std::string out_dir = ".";
  std::optional<double> temperature_k;
  unsigned workers = 1;
};

/// Reconstructs the temporal phase for every spectrum in a directory via
/// Gerchberg-Saxton, baseline-corrects against the lowest-power scan and
/// removes the fibre SPM background. The temporal magnitude fed to the
/// retrieval is the model output envelope at the power implied by the
/// bidirectional transmission fit.
inline ordered_json cmd_retrieve_phase(const RunConfig& cfg, const RetrievePhaseOptions& opt) {
  detail::ensure_dir(opt.out_dir);
  ordered_json fit_json;
  {
    auto in = io::detail::open_in(opt.fit_json_path);
    try {
      in >> fit_json;
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("fit JSON: ") + e.what(), 0);
    }
  }
  const auto bidi = detail::pick_bidirectional(fit_json, opt.temperature_k);
  const bool on_dir = cfg.retrieve_direction == "on";
  const double eta_in = on_dir ? bidi.eta_r : bidi.eta_l;
  const double chain = eta_in * (on_dir ? std::sqrt(cfg.excess_loss_on) : 1.0);
  const double sigma = bidi.sigma_fca_true.value_or(cfg.fca.sigma_at(bidi.temperature));

  std::vector<std::pair<double, std::string>> inputs;  // (power mW, path)
  for (const auto& entry : fs::directory_iterator(opt.spectra_dir)) {
    if (!entry.is_regular_file()) continue;
    if (const auto p = io::parse_spectrum_filename(entry.path().filename().string()))
      inputs.emplace_back(*p, entry.path().string());
  }
  if (inputs.empty())
    throw configuration_error("retrieve-phase: no spec_<power>mW.txt files in " + opt.spectra_dir);
  std::sort(inputs.begin(), inputs.end());

  double ref_power = inputs.front().first;
  if (cfg.reference_power_mw) {
    ref_power = *cfg.reference_power_mw;
    const bool present = std::any_of(inputs.begin(), inputs.end(), [&](const auto& e) {
      return e.first == ref_power;
    });
    if (!present)
      throw configuration_error("retrieve-phase: configured reference power has no spectrum file");
  }

  std::vector<RetrievedPhase> retrieved(
      inputs.size(), RetrievedPhase{cfg.grid, {}, 0.0, 0, false, {}});
  nlwg::detail::parallel_for_index(inputs.size(), opt.workers, [&](std::size_t i) {
    const double p_fiber_w = inputs[i].first * units::mw;
    const double peak = peak_from_average(chain * p_fiber_w, cfg.laser);
    const NonlinearCoeffs nl(0.0, bidi.alpha_tpa_true * cfg.waveguide.a_eff, sigma, 0.0);
    const auto pulse = sech2_pulse(cfg.grid, peak, cfg.laser.fwhm);
    const auto model = propagate(pulse, cfg.laser, cfg.waveguide, nl, cfg.solver);

    std::vector<double> time_mag(model.output.power.size());
    double energy = 0.0;
    for (std::size_t k = 0; k < time_mag.size(); ++k) {
      time_mag[k] = std::sqrt(model.output.power[k]);
      energy += model.output.power[k];
    }
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : time_mag) v *= scale;

    const auto spectrum = io::read_spectrum(inputs[i].second);
    const auto spec_mag = resample_spectrum(spectrum, cfg.grid, cfg.laser.wavelength);
    retrieved[i] = gerchberg_saxton(cfg.grid, spec_mag, time_mag, cfg.retrieval);
  });

  // Fibre background first (it is power-specific), then the baseline.
  std::vector<RetrievedPhase> corrected;
  corrected.reserve(retrieved.size());
  std::size_t ref_idx = 0;
  for (std::size_t i = 0; i < retrieved.size(); ++i) {
    const double p_fiber_w = inputs[i].first * units::mw;
    RetrievedPhase r = retrieved[i];
    if (cfg.fiber_gamma_l > 0.0 && p_fiber_w > 0.0) {
      const auto launched =
          sech2_pulse(cfg.grid, peak_from_average(p_fiber_w, cfg.laser), cfg.laser.fwhm);
      r = subtract_fiber_background(r, cfg.fiber_gamma_l, launched);
    }
    if (inputs[i].first == ref_power) ref_idx = i;
    corrected.push_back(std::move(r));
  }
  corrected = baseline_correct(corrected, corrected[ref_idx]);

  ordered_json per_power = ordered_json::array();
  for (std::size_t i = 0; i < corrected.size(); ++i) {
    const std::string name = "phase_" + io::spectrum_filename(inputs[i].first).substr(5);
    const std::string path = detail::join(opt.out_dir, name);
    io::write_retrieved_phase(path, corrected[i], inputs[i].first);
    bool monotone = true;
    const auto& hist = retrieved[i].error_history;
    for (std::size_t k = 1; k < hist.size(); ++k)
      if (hist[k] > hist[k - 1] + 1e-12) monotone = false;
    per_power.push_back({{"power_mw", inputs[i].first},
                         {"file", path},
                         {"in_waveguide_peak_w",
                          peak_from_average(chain * inputs[i].first * units::mw, cfg.laser)},
                         {"iterations", retrieved[i].iterations_used},
                         {"final_error", retrieved[i].final_error},
                         {"converged", retrieved[i].converged},
                         {"error_monotone", monotone},
                         {"is_reference", inputs[i].first == ref_power}});
  }

  ordered_json summary;
  summary["command"] = "retrieve-phase";
  summary["temperature_K"] = bidi.temperature;
  summary["direction"] = cfg.retrieve_direction;
  summary["reference_power_mw"] = ref_power;
  summary["eta_in"] = eta_in;
  summary["alpha_tpa_true_per_wm"] = bidi.alpha_tpa_true;
  summary["per_power"] = per_power;
  summary["provenance"] = detail::provenance(cfg);
  detail::write_json(detail::join(opt.out_dir, "retrieval.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// fit-phase
// ---------------------------------------------------------------------------

struct FitPhaseOptions {
  std::string phases_dir;
  std::string fit_json_path;
  std::string out_dir = ".";
  std::optional<double> temperature_k;
  unsigned workers = 1;
};

/// Fits (gamma, mu) to each baseline-corrected retrieved phase using S/T
/// tables computed at the bidirectionally-fitted TPA parameter and coupler
/// losses. The baseline correction is mirrored on the model side (reference
/// tables subtracted, masked mean removed from data and regressors), so the
/// 2x2 linear fit stays exact in the noise-free limit; both orientations of
/// the retrieval ambiguity are scored and the better one kept.
inline ordered_json cmd_fit_phase(const RunConfig& cfg, const FitPhaseOptions& opt) {
  detail::ensure_dir(opt.out_dir);
  ordered_json fit_json;
  {
    auto in = io::detail::open_in(opt.fit_json_path);
    try {
      in >> fit_json;
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("fit JSON: ") + e.what(), 0);
    }
  }
  const auto bidi = detail::pick_bidirectional(fit_json, opt.temperature_k);
  const bool on_dir = cfg.retrieve_direction == "on";
  const double eta_in = on_dir ? bidi.eta_r : bidi.eta_l;
  const double chain = eta_in * (on_dir ? std::sqrt(cfg.excess_loss_on) : 1.0);
  const double sigma = bidi.sigma_fca_true.value_or(cfg.fca.sigma_at(bidi.temperature));

  std::vector<io::LoadedPhase> phases;
  for (const auto& entry : fs::directory_iterator(opt.phases_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("phase_", 0) == 0 && name.size() > 10 &&
        name.substr(name.size() - 6) == "mW.txt")
      phases.push_back(io::read_retrieved_phase(entry.path().string()));
  }
  if (phases.size() < 2)
    throw configuration_error("fit-phase: need a reference and at least one scan");
  std::sort(phases.begin(), phases.end(),
            [](const auto& a, const auto& b) { return a.power_mw < b.power_mw; });

  // One S/T table per power, reference included, all at the fitted TPA value.
  std::vector<StTable> tables(phases.size(), StTable{cfg.grid, 0, 0, 0, {}, {}, {}});
  nlwg::detail::parallel_for_index(phases.size(), opt.workers, [&](std::size_t i) {
    const double peak = peak_from_average(chain * phases[i].power_mw * units::mw, cfg.laser);
    tables[i] = st_tables({peak}, {bidi.alpha_tpa_true}, sigma, cfg.grid, cfg.laser,
                          cfg.waveguide, cfg.solver)
                    .front();
    io::write_st_table(
        detail::join(opt.out_dir, "st_" + io::spectrum_filename(phases[i].power_mw).substr(5)),
        tables[i], cfg.waveguide);
  });

  const auto& ref_table = tables.front();
  const auto n = static_cast<std::size_t>(cfg.grid.n_samples());

  ordered_json per_power = ordered_json::array();
  std::vector<double> n2_values;
  for (std::size_t i = 1; i < phases.size(); ++i) {
    if (!(phases[i].phase.grid == cfg.grid))
      throw configuration_error("fit-phase: phase file grid differs from the configured grid");
    // Difference regressors mirror the baseline correction of the data.
    std::vector<double> s_adj(n), t_adj(n);
    for (std::size_t k = 0; k < n; ++k) {
      s_adj[k] = tables[i].s[k] - ref_table.s[k];
      t_adj[k] = tables[i].t[k] - ref_table.t[k];
    }
    const auto mask = st_fit_mask(tables[i].s);
    auto center = [&](std::vector<double>& v) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < n; ++k)
        if (mask[k]) {
          sum += v[k];
          ++count;
        }
      const double mean = sum / static_cast<double>(count);
      for (auto& x : v) x -= mean;
    };
    center(s_adj);
    center(t_adj);

    auto fit_orientation = [&](const std::vector<double>& data) {
      std::vector<double> d = data;
      center(d);
      return fit_phase_profile_masked(d, s_adj, t_adj, mask, sigma);
    };
    const PhaseFit direct = fit_orientation(phases[i].phase.phase);
    const PhaseFit twin = fit_orientation(conjugate_twin(phases[i].phase).phase);
    const bool use_twin = twin.residual_rms < direct.residual_rms;
    const PhaseFit& best = use_twin ? twin : direct;

    const double n2 =
        best.gamma * cfg.laser.wavelength * cfg.waveguide.a_eff / (2.0 * std::numbers::pi);
    n2_values.push_back(n2);
    per_power.push_back({{"power_mw", phases[i].power_mw},
                         {"gamma_per_wm", best.gamma},
                         {"mu", best.mu},
                         {"n2_m2_per_w", n2},
                         {"residual_rms_rad", best.residual_rms},
                         {"mu_identifiable", best.mu_identifiable},
                         {"orientation", use_twin ? "conjugate_twin" : "direct"}});
  }

  double mean_n2 = 0.0;
  for (double v : n2_values) mean_n2 += v;
  mean_n2 /= static_cast<double>(n2_values.size());
  double std_n2 = 0.0;
  const bool spread_defined = n2_values.size() >= 2;
  if (spread_defined) {
    for (double v : n2_values) std_n2 += (v - mean_n2) * (v - mean_n2);
    std_n2 = std::sqrt(std_n2 / static_cast<double>(n2_values.size() - 1));
  }

  {
    auto csv = io::detail::open_out(detail::join(opt.out_dir, "n2_series.csv"));
    csv << "temperature_K,n2_m2_per_w,std_m2_per_w\n";
    csv << bidi.temperature << ',' << mean_n2 << ',';
    if (spread_defined) csv << std_n2;
    csv << "\n";
  }

  ordered_json summary;
  summary["command"] = "fit-phase";
  summary["temperature_K"] = bidi.temperature;
  summary["reference_power_mw"] = phases.front().power_mw;
  summary["per_power"] = per_power;
  summary["n2_mean_m2_per_w"] = mean_n2;
  summary["n2_std_m2_per_w"] = spread_defined ? ordered_json(std_n2) : ordered_json(nullptr);
  summary["provenance"] = detail::provenance(cfg);
  detail::write_json(detail::join(opt.out_dir, "phase_fit.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// material
// ---------------------------------------------------------------------------

struct MaterialOptions {
  std::vector<double> temperatures;
  std::optional<double> beta_override_cm_gw;  // replaces the TPA model in every row
  std::string out_dir = ".";
};

/// Model table (T, beta_TPA, n2, sigma_FCA, FOM) in reporting units.
inline ordered_json cmd_material(const RunConfig& cfg, const MaterialOptions& opt) {
  if (opt.temperatures.empty()) throw configuration_error("material: no temperatures given");
  detail::ensure_dir(opt.out_dir);

  ordered_json rows = ordered_json::array();
  auto csv = io::detail::open_out(detail::join(opt.out_dir, "material_table.csv"));
  csv << "temperature_K,beta_tpa_cm_per_gw,n2_nm2_per_w,sigma_fca_m2,fom\n";
  for (double t : opt.temperatures) {
    const double beta_cm_gw =
        opt.beta_override_cm_gw ? *opt.beta_override_cm_gw : tpa_coefficient_cm_per_gw(t, cfg.tpa);
    const double n2 = kerr_coefficient_m2_per_w(t, cfg.kerr);
    const double sigma = cfg.fca.sigma_at(t);
    const double fom = nonlinear_fom(n2, units::tpa_cm_per_gw_to_m_per_w(beta_cm_gw),
                                     cfg.laser.wavelength);
    csv << t << ',' << beta_cm_gw << ',' << n2 / units::nm2_per_w << ',' << sigma << ',' << fom
        << "\n";
    rows.push_back({{"temperature_K", t},
                    {"beta_tpa_cm_per_gw", beta_cm_gw},
                    {"n2_m2_per_w", n2},
                    {"n2_nm2_per_w", n2 / units::nm2_per_w},
                    {"sigma_fca_m2", sigma},
                    {"fom", fom}});
  }

  ordered_json summary;
  summary["command"] = "material";
  summary["beta_source"] = opt.beta_override_cm_gw ? "override" : "model";
  summary["rows"] = rows;
  summary["provenance"] = detail::provenance(cfg);
  detail::write_json(detail::join(opt.out_dir, "material_table.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// herald
// ---------------------------------------------------------------------------

struct HeraldOptions {
  double p_pair = 0.05;
  double purity = 0.9;
  std::optional<double> fom;
  std::optional<double> temperature_k;
  std::string out_dir = ".";
};

/// Photon-pair heralding report for a given FOM or one derived from the
/// material models at a temperature.
inline ordered_json cmd_herald(const RunConfig& cfg, const HeraldOptions& opt) {
  detail::ensure_dir(opt.out_dir);
  double fom;
  std::string source;
  if (opt.fom) {
    fom = *opt.fom;
    source = "given";
  } else if (opt.temperature_k) {
    const double beta = units::tpa_cm_per_gw_to_m_per_w(
        tpa_coefficient_cm_per_gw(*opt.temperature_k, cfg.tpa));
    const double n2 = kerr_coefficient_m2_per_w(*opt.temperature_k, cfg.kerr);
    fom = nonlinear_fom(n2, beta, cfg.laser.wavelength);
    source = "temperature";
  } else {
    throw configuration_error("herald: need either a FOM or a temperature");
  }

  const PairSourceScenario scenario(opt.p_pair, opt.purity, fom);
  const auto metrics = pair_source_metrics(scenario);

  ordered_json summary;
  summary["command"] = "herald";
  summary["p_pair"] = opt.p_pair;
  summary["purity"] = opt.purity;
  summary["fom"] = fom;
  summary["fom_source"] = source;
  if (opt.temperature_k) summary["temperature_K"] = *opt.temperature_k;
  summary["xi"] = metrics.xi;
  summary["heralding_efficiency"] = metrics.heralding;
  summary["gamma_lp"] = metrics.gamma_lp;
  summary["weak_pump_ok"] = metrics.weak_pump_ok;
  summary["provenance"] = detail::provenance(cfg);
  detail::write_json(detail::join(opt.out_dir, "herald.json"), summary);
  return summary;
}

}  // namespace pipeline
}  // namespace nlwg
