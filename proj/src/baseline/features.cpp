#include "deepbeat/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "deepbeat/dsp.hpp"
#include "deepbeat/error.hpp"

namespace deepbeat::baseline {
namespace {

struct Moments {
  double mean = 0, m2 = 0, m3 = 0, m4 = 0;
};

Moments central_moments(std::span<const double> x) {
  Moments m;
  const auto n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

double variance(std::span<const double> x) { return central_moments(x).m2; }

std::vector<double> diff(std::span<const double> x) {
  std::vector<double> d;
  if (x.size() < 2) return d;
  d.resize(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

// Relative tolerance below which a variance is treated as zero.
bool degenerate(double var, std::span<const double> x) {
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  return var <= 1e-24 * std::max(1.0, scale * scale);
}

}  // namespace

const std::array<const char*, kFeatureCount>& feature_names() {
  static const std::array<const char*, kFeatureCount> names{
      "kurtosis", "skew", "spectral_entropy", "zero_crossings",
      "hjorth_mobility", "hjorth_complexity", "nrmssd", "shannon_entropy"};
  return names;
}

double excess_kurtosis(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const Moments m = central_moments(x);
  if (degenerate(m.m2, x)) return 0.0;
  return m.m4 / (m.m2 * m.m2) - 3.0;
}

double skewness(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const Moments m = central_moments(x);
  if (degenerate(m.m2, x)) return 0.0;
  return m.m3 / std::pow(m.m2, 1.5);
}

double spectral_entropy(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mean = central_moments(x).mean;
  const std::size_t bins = n / 2 + 1;
  std::vector<double> power(bins, 0.0);
  double total = 0.0;
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < bins; ++k) {
    // Rotating phasor with periodic re-anchoring keeps the recurrence accurate.
    std::complex<double> acc = 0.0;
    const std::complex<double> step = std::polar(1.0, -w * static_cast<double>(k));
    std::complex<double> phasor = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) phasor = std::polar(1.0, -w * static_cast<double>((k * i) % n));
      acc += (x[i] - mean) * phasor;
      phasor *= step;
    }
    power[k] = std::norm(acc);
    total += power[k];
  }
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double p : power) {
    const double q = p / total;
    if (q > 0.0) h -= q * std::log2(q);
  }
  return std::max(0.0, h);
}

std::size_t zero_crossings(std::span<const double> x) {
  if (x.size() < 2) return 0;
  const double mean = central_moments(x).mean;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if ((x[i] - mean) * (x[i + 1] - mean) < 0.0) ++count;
  return count;
}

double hjorth_mobility(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double vx = variance(x);
  if (degenerate(vx, x)) return 0.0;
  const auto d = diff(x);
  return std::sqrt(variance(d) / vx);
}

double hjorth_complexity(std::span<const double> x) {
  if (x.size() < 3) return 0.0;
  const double mx = hjorth_mobility(x);
  if (mx == 0.0) return 0.0;
  const auto d = diff(x);
  return hjorth_mobility(d) / mx;
}

double nrmssd(std::span<const double> x, double fs) {
  const auto peaks = dsp::detect_peaks(x, fs);
  if (peaks.size() < 3) return 0.0;
  std::vector<double> intervals(peaks.size() - 1);
  double mean = 0.0;
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
    intervals[i] = static_cast<double>(peaks[i + 1] - peaks[i]) / fs;
    mean += intervals[i];
  }
  mean /= static_cast<double>(intervals.size());
  double ss = 0.0;
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i) {
    const double d = intervals[i + 1] - intervals[i];
    ss += d * d;
  }
  const double rmssd = std::sqrt(ss / static_cast<double>(intervals.size() - 1));
  return rmssd / mean;
}

double histogram_entropy(std::span<const double> x, std::size_t bins) {
  if (x.empty() || bins == 0) return 0.0;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : x) {
    const double c = std::clamp(v, 0.0, 1.0);
    auto b = static_cast<std::size_t>(c * static_cast<double>(bins));
    counts[std::min(b, bins - 1)]++;
  }
  double h = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

FeatureVector extract_features(std::span<const double> x, double fs) {
  require(!x.empty(), ErrorKind::Domain, "extract_features: empty input");
  for (double v : x) require(std::isfinite(v), ErrorKind::Domain, "extract_features: non-finite sample");
  FeatureVector f;
  f.kurtosis = excess_kurtosis(x);
  f.skew = skewness(x);
  f.spectral_entropy = spectral_entropy(x);
  f.zero_crossings = static_cast<double>(zero_crossings(x));
  f.hjorth_mobility = hjorth_mobility(x);
  f.hjorth_complexity = hjorth_complexity(x);
  f.nrmssd = nrmssd(x, fs);
  f.shannon_entropy = histogram_entropy(x);
  return f;
}

FeatureVector extract_features(const Window& w) {
  dsp::check_window(w);
  return extract_features(w.samples, w.fs_effective);
}

}  // namespace deepbeat::baseline
