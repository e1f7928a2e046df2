#pragma once
// Independent reference computations for the tests: direct DFT, sample
// statistics.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace testutil {

/// Single-bin DFT by direct summation; returns the amplitude of a real
/// sinusoid occupying bin k (2|X_k| / N).
inline double dft_amplitude(std::span<const double> x, double k) {
  std::complex<double> s = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * static_cast<double>(i) / n);
  return 2.0 * std::abs(s) / n;
}

inline double mean(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double stdev(std::span<const double> x) {
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline std::vector<double> sine(std::size_t n, double fs, double f, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
  return x;
}

}  // namespace testutil
