#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlwg/config.hpp"
#include "nlwg/io.hpp"
#include "nlwg/pipeline.hpp"

using namespace nlwg;
namespace fs = std::filesystem;

namespace {

std::string work_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nlwg_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config() {
  ordered_json j;
  j["grid"] = {{"n_samples", 512}, {"window_ps", 64.0}};
  j["solver"] = {{"dz_um", 20.0}, {"tol", 1e-5}, {"max_step_halvings", 6}};
  return parse_run_config(j);
}

}  // namespace

TEST_CASE("scan CSV round trip and grouping") {
  const auto dir = work_dir("scan_csv");
  const std::string path = dir + "/scans.csv";

  SECTION("empty data section loads an empty list") {
    std::ofstream(path) << io::scan_csv_header << "\n";
    CHECK(io::load_scan_set(path).empty());
  }

  SECTION("one on-row and one off-row make two single-sample scans") {
    io::write_scan_rows(path, {{Direction::On, 300.0, 1.0, 0.05},
                               {Direction::Off, 300.0, 2.0, 0.11}});
    const auto scans = io::load_scan_set(path, 0.9);
    REQUIRE(scans.size() == 2);
    CHECK(scans[0].direction == Direction::Off);
    CHECK(scans[1].direction == Direction::On);
    CHECK(scans[1].excess_loss_on == 0.9);
    CHECK(scans[0].samples.size() == 1);
    CHECK_THAT(scans[0].samples[0].first, Catch::Matchers::WithinRel(2e-3, 1e-12));
  }

  SECTION("round trip preserves values") {
    std::vector<io::ScanRow> rows;
    for (int i = 0; i < 9; ++i)
      rows.push_back({i % 2 ? Direction::On : Direction::Off, 150.0, 0.02 * (i + 1),
                      0.00371 * (i + 1) * (1.0 + 0.013 * i)});
    io::write_scan_rows(path, rows);
    const auto scans = io::load_scan_set(path);
    double total = 0;
    for (const auto& s : scans)
      for (const auto& [a, b] : s.samples) total += a + b;
    double expected = 0;
    for (const auto& r : rows) expected += (r.p_in_mw + r.p_out_mw) * units::mw;
    CHECK_THAT(total, Catch::Matchers::WithinRel(expected, 1e-12));
  }

  SECTION("schema violations name the line") {
    std::ofstream(path) << "direction,temperature_K,p_in_mW\noff,300,1\n";
    CHECK_THROWS_AS(io::load_scan_set(path), parse_error);
    std::ofstream(path) << io::scan_csv_header << "\noff,300,1.0,0.1\nsideways,300,1.0,0.1\n";
    try {
      io::load_scan_set(path);
      FAIL("expected parse_error");
    } catch (const parse_error& e) {
      CHECK(e.line() == 3);
    }
    std::ofstream(path) << io::scan_csv_header << "\noff,300,-1.0,0.1\n";
    CHECK_THROWS_AS(io::load_scan_set(path), data_error);
  }
}

TEST_CASE("spectrum file round trip including dBm scale") {
  const auto dir = work_dir("spectrum_io");
  const std::string path = dir + "/spec_1mW.txt";
  std::vector<double> wl, psd;
  for (int i = 0; i < 40; ++i) {
    wl.push_back((1549.0 + 0.1 * i) * units::nm);
    psd.push_back(std::exp(-0.02 * (i - 20) * (i - 20)));
  }
  io::write_spectrum(path, wl, psd, 0.05 * units::nm);
  const auto rec = io::read_spectrum(path);
  REQUIRE(rec.wavelengths.size() == wl.size());
  for (std::size_t i = 0; i < wl.size(); ++i) {
    CHECK_THAT(rec.wavelengths[i], Catch::Matchers::WithinRel(wl[i], 1e-12));
    CHECK_THAT(rec.psd[i], Catch::Matchers::WithinRel(psd[i], 1e-12));
  }
  CHECK_THAT(rec.resolution_bw, Catch::Matchers::WithinRel(0.05 * units::nm, 1e-9));

  // dBm rows convert to linear mW.
  std::ofstream(path) << "# scale: dbm\n1550 -10\n1551 0\n1552 10\n";
  const auto db = io::read_spectrum(path);
  CHECK_THAT(db.psd[0], Catch::Matchers::WithinRel(0.1, 1e-12));
  CHECK_THAT(db.psd[1], Catch::Matchers::WithinRel(1.0, 1e-12));
  CHECK_THAT(db.psd[2], Catch::Matchers::WithinRel(10.0, 1e-12));

  CHECK(io::parse_spectrum_filename("spec_0.02mW.txt").value() == 0.02);
  CHECK(io::spectrum_filename(0.02) == "spec_0.02mW.txt");
  CHECK_FALSE(io::parse_spectrum_filename("spec_mW.txt").has_value());
  CHECK_FALSE(io::parse_spectrum_filename("other.txt").has_value());
}

TEST_CASE("st table file round trip") {
  const auto dir = work_dir("st_io");
  const auto cfg = small_config();
  const auto tables = st_tables({2.0}, {76.1}, 3.7e-22, cfg.grid, cfg.laser, cfg.waveguide,
                                cfg.solver);
  const std::string path = dir + "/st.txt";
  io::write_st_table(path, tables[0], cfg.waveguide);
  const auto back = io::read_st_table(path);
  CHECK(back.grid == tables[0].grid);
  CHECK(back.peak_power == tables[0].peak_power);
  CHECK(back.alpha_tpa == tables[0].alpha_tpa);
  REQUIRE(back.s.size() == tables[0].s.size());
  for (std::size_t i = 0; i < back.s.size(); ++i) {
    CHECK(back.s[i] == tables[0].s[i]);
    CHECK(back.t[i] == tables[0].t[i]);
  }
}

TEST_CASE("retrieved phase file round trip") {
  const auto dir = work_dir("phase_io");
  const auto grid = TemporalGrid::centered(256, 64e-12);
  RetrievedPhase rp{grid, std::vector<double>(256), 3.2e-7, 123, true, {}};
  for (int i = 0; i < 256; ++i) rp.phase[static_cast<std::size_t>(i)] = std::sin(0.1 * i);
  const std::string path = dir + "/phase_0.5mW.txt";
  io::write_retrieved_phase(path, rp, 0.5);
  const auto back = io::read_retrieved_phase(path);
  CHECK(back.power_mw == 0.5);
  CHECK(back.phase.grid == grid);
  CHECK(back.phase.iterations_used == 123);
  CHECK(back.phase.converged);
  for (std::size_t i = 0; i < 256; ++i)
    CHECK(back.phase.phase[i] == rp.phase[i]);
}

TEST_CASE("run config defaults, hashing and validation") {
  const auto cfg = parse_run_config(ordered_json::object());
  CHECK(cfg.grid.n_samples() == 4096);
  CHECK_THAT(cfg.waveguide.length, Catch::Matchers::WithinRel(19.09e-3, 1e-12));
  CHECK_THAT(cfg.excess_loss_on, Catch::Matchers::WithinRel(1.0, 1e-12));
  CHECK(cfg.config_hash.size() == 16);

  // Identical input produces an identical hash; changed input changes it.
  const auto cfg2 = parse_run_config(ordered_json::object());
  CHECK(cfg.config_hash == cfg2.config_hash);
  ordered_json j;
  j["waveguide"]["a_eff_um2"] = 0.2;
  CHECK(parse_run_config(j).config_hash != cfg.config_hash);

  ordered_json bad;
  bad["solver"]["tol"] = "tight";
  CHECK_THROWS_AS(parse_run_config(bad), configuration_error);

  ordered_json missing;
  missing["paths"]["scans"] = "/nonexistent/file.csv";
  CHECK_THROWS_AS(parse_run_config(missing), configuration_error);

  ordered_json variant;
  variant["materials"]["tpa"]["variant"] = "as_printed";
  CHECK(parse_run_config(variant).tpa.variant == TpaVariant::AsPrinted);
}

TEST_CASE("coefficient resolution order") {
  ordered_json j;
  j["nonlinear"]["mu"] = 7.0;
  j["nonlinear"]["beta_tpa_cm_per_gw"] = 0.761;
  const auto cfg = parse_run_config(j);

  // Config override wins over the model; CLI override wins over both.
  const auto from_config = resolve_coeffs(cfg, 300.0);
  CHECK_THAT(from_config.beta_tpa, Catch::Matchers::WithinRel(0.761e-11, 1e-12));
  CHECK_THAT(from_config.n2, Catch::Matchers::WithinRel(5.18e-18, 5e-3));
  CHECK(from_config.mu == 7.0);

  CoeffOverrides cli;
  cli.beta_tpa_cm_per_gw = 0.5;
  CHECK_THAT(resolve_coeffs(cfg, 300.0, cli).beta_tpa,
             Catch::Matchers::WithinRel(0.5e-11, 1e-12));

  // Without a temperature the model-backed coefficients are unavailable.
  CHECK_THROWS_AS(resolve_coeffs(cfg, std::nullopt), configuration_error);
}

TEST_CASE("cmd_simulate zero-coefficient run reproduces the input") {
  const auto dir = work_dir("sim_identity");
  ordered_json j;
  j["grid"] = {{"n_samples", 512}, {"window_ps", 64.0}};
  j["waveguide"]["linear_loss_db_per_cm"] = 0.0;
  const auto cfg = parse_run_config(j);
  pipeline::SimulateOptions opt;
  opt.avg_power_w = 1e-3;
  opt.overrides.beta_tpa_cm_per_gw = 0.0;
  opt.overrides.n2_m2_per_w = 0.0;
  opt.overrides.sigma_fca_m2 = 0.0;
  opt.overrides.mu = 0.0;
  opt.out_dir = dir;
  const auto summary = pipeline::cmd_simulate(cfg, opt);
  CHECK(summary["transmission"].get<double>() == 1.0);
  CHECK_THAT(summary["pulse_energy_out_j"].get<double>(),
             Catch::Matchers::WithinRel(summary["pulse_energy_in_j"].get<double>(), 1e-12));
}

TEST_CASE("cmd_simulate reports the headline peak power at 5 mW average") {
  const auto dir = work_dir("sim_peak");
  auto cfg = small_config();
  pipeline::SimulateOptions opt;
  opt.avg_power_w = 5e-3;
  opt.temperature_k = 300.0;
  opt.overrides.mu = 7.0;
  opt.out_dir = dir;
  const auto summary = pipeline::cmd_simulate(cfg, opt);
  CHECK_THAT(summary["peak_power_in_w"].get<double>(), Catch::Matchers::WithinAbs(18.0, 0.1));
  CHECK(fs::exists(dir + "/output_pulse.txt"));
  CHECK(fs::exists(dir + "/spectrum.txt"));
  CHECK(fs::exists(dir + "/st_table.txt"));
  // The spectrum file loads back into a valid record.
  const auto rec = io::read_spectrum(dir + "/spectrum.txt");
  CHECK(rec.wavelengths.size() == 512);
}

TEST_CASE("cmd_simulate sweep with zero TPA emits a constant column") {
  const auto dir = work_dir("sim_sweep");
  const auto cfg = small_config();
  pipeline::SimulateOptions opt;
  opt.overrides.beta_tpa_cm_per_gw = 0.0;
  opt.overrides.n2_m2_per_w = 5.18e-18;
  opt.overrides.sigma_fca_m2 = 3.7e-22;
  opt.overrides.mu = 0.0;
  for (double p : {0.02, 0.5, 1.0, 2.0, 5.0}) opt.sweep_avg_powers_w.push_back(p * units::mw);
  opt.out_dir = dir;
  pipeline::cmd_simulate(cfg, opt);

  std::ifstream csv(dir + "/inverse_transmission.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "p_in_mW,inv_transmission");
  std::vector<double> values;
  std::string line;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  REQUIRE(values.size() == 5);
  for (double v : values) CHECK_THAT(v, Catch::Matchers::WithinRel(values[0], 1e-9));
}

TEST_CASE("simulate outputs are byte-identical across runs and worker counts") {
  const auto dir1 = work_dir("det_a");
  const auto dir2 = work_dir("det_b");
  const auto cfg = small_config();
  auto run = [&](const std::string& dir, unsigned workers) {
    pipeline::SimulateOptions opt;
    opt.overrides.beta_tpa_cm_per_gw = 0.761;
    opt.overrides.n2_m2_per_w = 5.18e-18;
    opt.overrides.sigma_fca_m2 = 3.7e-22;
    opt.overrides.mu = 7.0;
    for (double p : {0.02, 0.2, 0.7, 1.5, 3.0, 5.0}) opt.sweep_avg_powers_w.push_back(p * units::mw);
    opt.out_dir = dir;
    opt.workers = workers;
    pipeline::cmd_simulate(cfg, opt);
  };
  run(dir1, 1);
  run(dir2, 4);
  CHECK(slurp(dir1 + "/inverse_transmission.csv") == slurp(dir2 + "/inverse_transmission.csv"));
  run(dir2, 1);  // repeat in place: same bytes again
  CHECK(slurp(dir1 + "/inverse_transmission.csv") == slurp(dir2 + "/inverse_transmission.csv"));
  CHECK(slurp(dir1 + "/summary.json") == slurp(dir2 + "/summary.json"));
}

TEST_CASE("cmd_material rows in reporting units") {
  const auto dir = work_dir("material");
  const auto cfg = parse_run_config(ordered_json::object());
  pipeline::MaterialOptions opt;
  opt.temperatures = {0.0, 5.5, 50.0, 150.0, 300.0};
  opt.out_dir = dir;
  const auto summary = pipeline::cmd_material(cfg, opt);
  const auto& rows = summary["rows"];
  REQUIRE(rows.size() == 5);
  CHECK_THAT(rows[0]["n2_nm2_per_w"].get<double>(), Catch::Matchers::WithinRel(3.86, 1e-9));
  CHECK(rows[0]["sigma_fca_m2"].get<double>() == 0.0);
  // n2 column is monotone in temperature.
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i]["n2_nm2_per_w"].get<double>() >= rows[i - 1]["n2_nm2_per_w"].get<double>());

  // With the published room-temperature TPA value the FOM lands on 0.44.
  pipeline::MaterialOptions ovr;
  ovr.temperatures = {300.0};
  ovr.beta_override_cm_gw = 0.761;
  ovr.out_dir = dir;
  const auto s2 = pipeline::cmd_material(cfg, ovr);
  CHECK_THAT(s2["rows"][0]["fom"].get<double>(), Catch::Matchers::WithinAbs(0.44, 0.01));
}

TEST_CASE("cmd_herald worked examples") {
  const auto dir = work_dir("herald");
  const auto cfg = parse_run_config(ordered_json::object());
  pipeline::HeraldOptions opt;
  opt.p_pair = 0.05;
  opt.purity = 0.9;
  opt.fom = 0.44;
  opt.out_dir = dir;
  CHECK_THAT(pipeline::cmd_herald(cfg, opt)["heralding_efficiency"].get<double>(),
             Catch::Matchers::WithinAbs(0.74, 0.01));
  opt.fom = 4.4;
  CHECK_THAT(pipeline::cmd_herald(cfg, opt)["heralding_efficiency"].get<double>(),
             Catch::Matchers::WithinAbs(0.97, 0.01));

  pipeline::HeraldOptions none;
  none.out_dir = dir;
  CHECK_THROWS_AS(pipeline::cmd_herald(cfg, none), configuration_error);
  pipeline::HeraldOptions bad;
  bad.purity = 1.2;
  bad.fom = 0.44;
  bad.out_dir = dir;
  CHECK_THROWS_AS(pipeline::cmd_herald(cfg, bad), std::invalid_argument);

  // FOM derived from the models at 0 K beats the room-temperature one.
  pipeline::HeraldOptions cold;
  cold.temperature_k = 0.0;
  cold.out_dir = dir;
  pipeline::HeraldOptions warm;
  warm.temperature_k = 300.0;
  warm.out_dir = dir;
  CHECK(pipeline::cmd_herald(cfg, cold)["heralding_efficiency"].get<double>() >
        pipeline::cmd_herald(cfg, warm)["heralding_efficiency"].get<double>());
}
