#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace nlwg {

struct GoldenResult {
  double x;
  double fx;
  int evaluations;
};

/// Golden-section minimisation of a unimodal function on [lo, hi] down to an
/// absolute bracket width of tol_x.
template <typename F>
GoldenResult golden_section_min(F&& f, double lo, double hi, double tol_x, int max_iter = 200) {
  if (!(hi > lo)) throw std::invalid_argument("golden_section_min: need hi > lo");
  if (!(tol_x > 0.0)) throw std::invalid_argument("golden_section_min: tol_x must be positive");
  constexpr double inv_phi = 0.6180339887498949;  // 1/phi
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  int evals = 2;
  for (int it = 0; it < max_iter && (b - a) > tol_x; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
    ++evals;
  }
  const double x = f1 <= f2 ? x1 : x2;
  return {x, f1 <= f2 ? f1 : f2, evals};
}

namespace detail {

/// Gaussian elimination with partial pivoting for small dense systems
/// (normal equations of the linear fits). Throws std::runtime_error when the
/// matrix is numerically singular.
inline std::vector<double> solve_spd(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n) throw std::invalid_argument("solve_spd: bad dimensions");
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw std::runtime_error("solve_spd: zero matrix");

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-13 * scale)
      throw std::runtime_error("solve_spd: singular matrix");
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= m * a[col][c];
      b[r] -= m * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace detail
}  // namespace nlwg
