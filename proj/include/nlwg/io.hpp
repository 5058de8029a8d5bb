#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlwg/constants.hpp"
#include "nlwg/errors.hpp"
#include "nlwg/fitting.hpp"
#include "nlwg/phase_retrieval.hpp"
#include "nlwg/propagation.hpp"

namespace nlwg {
namespace io {

inline constexpr const char* scan_csv_header = "direction,temperature_K,p_in_mW,p_out_mW";

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw configuration_error("cannot open for writing: " + path);
  out << std::setprecision(17);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw configuration_error("cannot open for reading: " + path);
  return in;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline double parse_double(const std::string& s, long line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw parse_error("cannot parse number '" + s + "'", line);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Power-scan CSV
// ---------------------------------------------------------------------------

struct ScanRow {
  Direction direction;
  double temperature_k;
  double p_in_mw;
  double p_out_mw;
};

inline void write_scan_rows(const std::string& path, const std::vector<ScanRow>& rows) {
  auto out = detail::open_out(path);
  out << scan_csv_header << "\n";
  for (const auto& r : rows)
    out << to_string(r.direction) << ',' << r.temperature_k << ',' << r.p_in_mw << ','
        << r.p_out_mw << "\n";
}

/// Loads a scan CSV, grouping rows by (temperature, direction) into PowerScan
/// objects with SI units and samples sorted by input power. eta_x is attached
/// to On-direction scans. Scans come back ordered by temperature, Off before
/// On.
inline std::vector<PowerScan> load_scan_set(const std::string& path, double eta_x = 1.0) {
  auto in = detail::open_in(path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw parse_error("empty scan file", 1);
  ++line_no;
  if (detail::trim(line) != scan_csv_header)
    throw parse_error("scan file header must be exactly '" + std::string(scan_csv_header) + "'",
                      line_no);

  std::map<std::pair<double, int>, std::vector<std::pair<double, double>>> groups;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto parts = detail::split(line, ',');
    if (parts.size() != 4) throw parse_error("expected 4 comma-separated fields", line_no);
    const std::string dir_str = detail::trim(parts[0]);
    Direction dir;
    if (dir_str == "on")
      dir = Direction::On;
    else if (dir_str == "off")
      dir = Direction::Off;
    else
      throw parse_error("direction must be 'on' or 'off', got '" + dir_str + "'", line_no);
    const double t = detail::parse_double(detail::trim(parts[1]), line_no);
    const double p_in = detail::parse_double(detail::trim(parts[2]), line_no);
    const double p_out = detail::parse_double(detail::trim(parts[3]), line_no);
    if (!(t >= 0.0)) throw data_error("negative temperature at line " + std::to_string(line_no));
    if (!(p_in > 0.0) || !(p_out > 0.0))
      throw data_error("non-positive power at line " + std::to_string(line_no));
    groups[{t, dir == Direction::Off ? 0 : 1}].emplace_back(p_in * units::mw, p_out * units::mw);
  }

  std::vector<PowerScan> scans;
  scans.reserve(groups.size());
  for (auto& [key, samples] : groups) {
    std::sort(samples.begin(), samples.end());
    const Direction dir = key.second == 0 ? Direction::Off : Direction::On;
    scans.emplace_back(dir, key.first, std::move(samples), dir == Direction::On ? eta_x : 1.0);
  }
  return scans;
}

// ---------------------------------------------------------------------------
// Spectrum files: two columns (wavelength nm, power), '#'-prefixed headers.
// A "# scale: dbm" header selects dBm input; default is linear.
// ---------------------------------------------------------------------------

inline void write_spectrum(const std::string& path, const std::vector<double>& wavelengths_m,
                           const std::vector<double>& psd_linear, double rbw_m = 0.0) {
  auto out = detail::open_out(path);
  out << "# scale: linear\n";
  if (rbw_m > 0.0) out << "# rbw_nm: " << rbw_m / units::nm << "\n";
  out << "# columns: wavelength_nm power_linear\n";
  for (std::size_t i = 0; i < wavelengths_m.size(); ++i)
    out << wavelengths_m[i] / units::nm << ' ' << psd_linear[i] << "\n";
}

inline SpectrumRecord read_spectrum(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  long line_no = 0;
  bool dbm = false;
  double rbw_m = 0.0;
  std::vector<double> wl, psd;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto pos = t.find(':');
      if (pos != std::string::npos) {
        const std::string key = detail::trim(t.substr(1, pos - 1));
        const std::string value = detail::trim(t.substr(pos + 1));
        if (key == "scale") {
          if (value == "dbm")
            dbm = true;
          else if (value == "linear")
            dbm = false;
          else
            throw parse_error("unknown spectrum scale '" + value + "'", line_no);
        } else if (key == "rbw_nm") {
          rbw_m = detail::parse_double(value, line_no) * units::nm;
        }
      }
      continue;
    }
    std::istringstream row(t);
    double a, b;
    if (!(row >> a >> b)) throw parse_error("expected two numeric columns", line_no);
    wl.push_back(a * units::nm);
    psd.push_back(dbm ? units::dbm_to_mw(b) : b);
  }
  if (wl.empty()) throw parse_error("spectrum file contains no data rows", line_no);
  try {
    return SpectrumRecord(std::move(wl), std::move(psd), rbw_m);
  } catch (const std::invalid_argument& e) {
    throw data_error(std::string("invalid spectrum: ") + e.what());
  }
}

inline std::string spectrum_filename(double power_mw) {
  std::ostringstream name;
  name << std::setprecision(10) << "spec_" << power_mw << "mW.txt";
  return name.str();
}

inline std::optional<double> parse_spectrum_filename(const std::string& name) {
  constexpr const char* prefix = "spec_";
  constexpr const char* suffix = "mW.txt";
  if (name.size() <= std::string(prefix).size() + std::string(suffix).size()) return std::nullopt;
  if (name.rfind(prefix, 0) != 0) return std::nullopt;
  if (name.substr(name.size() - std::string(suffix).size()) != suffix) return std::nullopt;
  const std::string middle =
      name.substr(std::string(prefix).size(),
                  name.size() - std::string(prefix).size() - std::string(suffix).size());
  try {
    std::size_t pos = 0;
    const double v = std::stod(middle, &pos);
    if (pos != middle.size() || !(v >= 0.0)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// S/T tables: '#' headers naming the grid parameters, then one
// "tau_s  S  T" row per sample.
// ---------------------------------------------------------------------------

inline void write_st_table(const std::string& path, const StTable& st, const WaveguideSpec& wg) {
  auto out = detail::open_out(path);
  out << "# st_table\n";
  out << "# n_samples: " << st.grid.n_samples() << "\n";
  out << "# dt_s: " << st.grid.dt() << "\n";
  out << "# t0_s: " << st.grid.t0() << "\n";
  out << "# peak_power_w: " << st.peak_power << "\n";
  out << "# alpha_tpa_per_wm: " << st.alpha_tpa << "\n";
  out << "# sigma_fca_m2: " << st.sigma_fca << "\n";
  out << "# length_m: " << wg.length << "\n";
  out << "# linear_loss_per_m: " << wg.linear_loss << "\n";
  out << "# carrier_lifetime_s: " << wg.carrier_lifetime << "\n";
  out << "# chi_per_m4: " << wg.chi_gen << "\n";
  out << "# columns: tau_s s_w_m t_per_m2\n";
  for (int i = 0; i < st.grid.n_samples(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out << st.grid.time(i) << ' ' << st.s[k] << ' ' << st.t[k] << "\n";
  }
}

inline StTable read_st_table(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  long line_no = 0;
  std::map<std::string, double> header;
  std::vector<double> s, t;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      const auto pos = trimmed.find(':');
      if (pos != std::string::npos) {
        const std::string key = detail::trim(trimmed.substr(1, pos - 1));
        const std::string value = detail::trim(trimmed.substr(pos + 1));
        if (key != "columns") {
          try {
            header[key] = std::stod(value);
          } catch (const std::exception&) {
            // non-numeric provenance entries are ignored
          }
        }
      }
      continue;
    }
    std::istringstream row(trimmed);
    double tau, sv, tv;
    if (!(row >> tau >> sv >> tv)) throw parse_error("expected three numeric columns", line_no);
    s.push_back(sv);
    t.push_back(tv);
  }
  for (const char* key : {"n_samples", "dt_s", "t0_s", "peak_power_w", "alpha_tpa_per_wm",
                          "sigma_fca_m2"})
    if (!header.count(key)) throw parse_error(std::string("missing header '") + key + "'", 1);
  const int n = static_cast<int>(header["n_samples"]);
  if (static_cast<std::size_t>(n) != s.size())
    throw parse_error("row count does not match n_samples header", line_no);
  TemporalGrid grid(n, header["dt_s"], header["t0_s"]);
  return StTable{grid,         header["peak_power_w"], header["alpha_tpa_per_wm"],
                 header["sigma_fca_m2"], std::move(s),  std::move(t),
                 {}};
}

// ---------------------------------------------------------------------------
// Retrieved-phase files: two columns (tau ps, dphi rad).
// ---------------------------------------------------------------------------

inline void write_retrieved_phase(const std::string& path, const RetrievedPhase& rp,
                                  double power_mw) {
  auto out = detail::open_out(path);
  out << "# retrieved_phase\n";
  out << "# power_mw: " << power_mw << "\n";
  out << "# n_samples: " << rp.grid.n_samples() << "\n";
  out << "# dt_s: " << rp.grid.dt() << "\n";
  out << "# t0_s: " << rp.grid.t0() << "\n";
  out << "# iterations: " << rp.iterations_used << "\n";
  out << "# final_error: " << rp.final_error << "\n";
  out << "# converged: " << (rp.converged ? 1 : 0) << "\n";
  out << "# columns: tau_ps dphi_rad\n";
  for (int i = 0; i < rp.grid.n_samples(); ++i)
    out << rp.grid.time(i) / units::ps << ' ' << rp.phase[static_cast<std::size_t>(i)] << "\n";
}

struct LoadedPhase {
  RetrievedPhase phase;
  double power_mw;
};

inline LoadedPhase read_retrieved_phase(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  long line_no = 0;
  std::map<std::string, double> header;
  std::vector<double> phase;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      const auto pos = trimmed.find(':');
      if (pos != std::string::npos) {
        const std::string key = detail::trim(trimmed.substr(1, pos - 1));
        const std::string value = detail::trim(trimmed.substr(pos + 1));
        if (key != "columns") {
          try {
            header[key] = std::stod(value);
          } catch (const std::exception&) {
          }
        }
      }
      continue;
    }
    std::istringstream row(trimmed);
    double tau, ph;
    if (!(row >> tau >> ph)) throw parse_error("expected two numeric columns", line_no);
    phase.push_back(ph);
  }
  for (const char* key : {"power_mw", "n_samples", "dt_s", "t0_s"})
    if (!header.count(key)) throw parse_error(std::string("missing header '") + key + "'", 1);
  const int n = static_cast<int>(header["n_samples"]);
  if (static_cast<std::size_t>(n) != phase.size())
    throw parse_error("row count does not match n_samples header", line_no);
  TemporalGrid grid(n, header["dt_s"], header["t0_s"]);
  RetrievedPhase rp{grid,
                    std::move(phase),
                    header.count("final_error") ? header["final_error"] : 0.0,
                    header.count("iterations") ? static_cast<int>(header["iterations"]) : 0,
                    header.count("converged") ? header["converged"] != 0.0 : false,
                    {}};
  return {std::move(rp), header["power_mw"]};
}

}  // namespace io
}  // namespace nlwg
