#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace nlwg {

/// In-place radix-2 Cooley-Tukey FFT for power-of-two lengths. Forward uses
/// the e^{-2 pi i jk/n} kernel; the inverse is scaled by 1/n. Twiddles are
/// computed per call so invocations share no state.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft: length must be a power of two");
  if (n == 1) return;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  // Twiddle table exp(sign * 2 pi i k / n), k < n/2, indexed by stride.
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> tw(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = {std::cos(ang), std::sin(ang)};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t blk = 0; blk < n; blk += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = tw[k * stride];
        const std::complex<double> u = a[blk + k];
        const std::complex<double> v = a[blk + k + len / 2] * w;
        a[blk + k] = u + v;
        a[blk + k + len / 2] = u - v;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv_n;
  }
}

inline std::vector<std::complex<double>> fft_forward(std::vector<std::complex<double>> a) {
  fft_inplace(a, false);
  return a;
}

inline std::vector<std::complex<double>> fft_inverse(std::vector<std::complex<double>> a) {
  fft_inplace(a, true);
  return a;
}

}  // namespace nlwg
