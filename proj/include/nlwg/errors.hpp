#pragma once

#include <stdexcept>
#include <string>

namespace nlwg {

/// Solver step halving exhausted the halving budget before reaching the
/// requested relative tolerance. Carries the last Richardson estimate.
class convergence_failure : public std::runtime_error {
 public:
  convergence_failure(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}
  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

/// Non-finite power or carrier density appeared during propagation.
class instability_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file; reports the 1-based line number.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, long line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Structurally valid input whose values are physically inadmissible.
class data_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Data contradicts the measurement model (e.g. non-positive intercept).
class data_inconsistent : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Optimizer could not locate a minimum (bracket failure and similar).
class fit_failure : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Singular or rank-deficient least-squares system.
class degenerate_fit : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// No usable input remained after validation/pairing.
class nothing_to_fit : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class configuration_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Spectrum support exceeds the Nyquist band of the target grid.
class aliasing_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nlwg
