#include "deepbeat/dsp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "deepbeat/error.hpp"

namespace deepbeat::dsp {
namespace {

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    require(std::isfinite(v), ErrorKind::Domain, std::string(what) + ": non-finite sample");
}

double prewarp(double cutoff, double fs) { return std::tan(std::numbers::pi * cutoff / fs); }

// Steady-state state of one section for a constant input u.
std::pair<double, double> steady_state(const Biquad& s, double u) {
  const double y = s.dc_gain() * u;
  const double z2 = s.b2 * u - s.a2 * y;
  const double z1 = s.b1 * u - s.a1 * y + z2;
  return {z1, z2};
}

void run_cascade(std::span<const Biquad> sections, std::vector<double>& x) {
  if (x.empty()) return;
  double u0 = x.front();
  for (const Biquad& s : sections) {
    auto [z1, z2] = steady_state(s, u0);
    u0 *= s.dc_gain();
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

std::vector<double> normalize01(std::span<const double> x) {
  require(!x.empty(), ErrorKind::Domain, "normalize01: empty input");
  require_finite(x, "normalize01");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> out(x.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp((x[i] - lo) / range, 0.0, 1.0);
  }
  return out;
}

Biquad butterworth_lowpass(double cutoff, double fs) {
  const double k = prewarp(cutoff, fs);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  Biquad q;
  q.b0 = k * k * norm;
  q.b1 = 2.0 * q.b0;
  q.b2 = q.b0;
  q.a1 = 2.0 * (k * k - 1.0) * norm;
  q.a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  return q;
}

Biquad butterworth_highpass(double cutoff, double fs) {
  const double k = prewarp(cutoff, fs);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  Biquad q;
  q.b0 = norm;
  q.b1 = -2.0 * norm;
  q.b2 = norm;
  q.a1 = 2.0 * (k * k - 1.0) * norm;
  q.a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  return q;
}

std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x,
                             std::size_t padlen) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  padlen = std::min(padlen, n - 1);
  std::vector<double> ext(n + 2 * padlen);
  for (std::size_t i = 0; i < padlen; ++i) {
    ext[i] = 2.0 * x[0] - x[padlen - i];
    ext[padlen + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(padlen));
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen),
          ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

Signal bandpass(const Signal& x, double lo, double hi) {
  require(x.fs > 0.0, ErrorKind::Config, "bandpass: fs must be positive");
  require(lo > 0.0 && lo < hi && hi < x.fs / 2.0, ErrorKind::Config,
          "bandpass: band must satisfy 0 < lo < hi < fs/2");
  require(!x.samples.empty(), ErrorKind::Domain, "bandpass: empty signal");
  require_finite(x.samples, "bandpass");
  const Biquad sections[] = {butterworth_highpass(lo, x.fs), butterworth_lowpass(hi, x.fs)};
  const auto padlen = static_cast<std::size_t>(std::ceil(x.fs / lo));
  Signal out = x;
  out.samples = filtfilt(sections, x.samples, padlen);
  return out;
}

Signal resample_to_grid(const Signal& x, double target_fs) {
  require(target_fs > 0.0 && target_fs < x.fs, ErrorKind::Config,
          "resample_to_grid: target_fs must be positive and below the source rate");
  require(!x.samples.empty(), ErrorKind::Domain, "resample_to_grid: empty signal");
  Signal out;
  out.fs = target_fs;
  out.meta = x.meta;
  const double ratio = x.fs / target_fs;
  const double whole = std::round(ratio);
  const std::size_t n = x.samples.size();
  if (std::abs(ratio - whole) < 1e-9) {
    const auto step = static_cast<std::size_t>(whole);
    for (std::size_t i = 0; i < n; i += step) out.samples.push_back(x.samples[i]);
    return out;
  }
  const auto n_out =
      static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) * target_fs / x.fs + 1e-9)) + 1;
  out.samples.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * x.fs / target_fs;
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(pos)), n - 1);
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    const double frac = pos - static_cast<double>(i0);
    out.samples[j] = x.samples[i0] + frac * (x.samples[i1] - x.samples[i0]);
  }
  return out;
}

std::vector<Window> segment_windows(const Signal& x, double window_s, double stride_s) {
  require(window_s > 0.0 && stride_s > 0.0, ErrorKind::Config, "segment_windows: window and stride must be positive");
  const auto len = static_cast<std::size_t>(std::llround(window_s * x.fs));
  const auto stride = static_cast<std::size_t>(std::llround(stride_s * x.fs));
  require(len == kWindowLength, ErrorKind::Config,
          "segment_windows: window must span exactly 800 samples at the signal rate");
  require(stride > 0, ErrorKind::Config, "segment_windows: stride shorter than one sample");
  std::vector<Window> out;
  const std::size_t n = x.samples.size();
  for (std::size_t start = 0; start + len <= n; start += stride) {
    Window w;
    w.samples = normalize01(std::span<const double>(x.samples).subspan(start, len));
    w.fs_effective = x.fs;
    w.start = start;
    if (x.meta) {
      w.subject_id = x.meta->subject_id;
      w.source_id = x.meta->subject_id;
      w.rhythm = x.meta->rhythm;
    }
    out.push_back(std::move(w));
  }
  return out;
}

double percentile(std::span<const double> x, double q) {
  require(!x.empty(), ErrorKind::Domain, "percentile: empty input");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto i0 = static_cast<std::size_t>(std::floor(pos));
  const std::size_t i1 = std::min(i0 + 1, sorted.size() - 1);
  return sorted[i0] + (pos - static_cast<double>(i0)) * (sorted[i1] - sorted[i0]);
}

std::vector<std::size_t> detect_peaks(std::span<const double> x, double fs, double refractory_s,
                                      double pct) {
  std::vector<std::size_t> peaks;
  const std::size_t n = x.size();
  if (n < 3) return peaks;
  const double threshold = percentile(x, pct);
  const auto reach = static_cast<std::size_t>(std::floor(refractory_s * fs));
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(x[i] > threshold && x[i] > x[i - 1] && x[i] >= x[i + 1])) continue;
    const std::size_t lo = i > reach ? i - reach : 0;
    const std::size_t hi = std::min(n - 1, i + reach);
    bool dominant = true;
    for (std::size_t j = lo; j < i && dominant; ++j) dominant = x[j] < x[i];
    for (std::size_t j = i + 1; j <= hi && dominant; ++j) dominant = x[j] <= x[i];
    if (dominant) peaks.push_back(i);
  }
  return peaks;
}

std::vector<double> savgol_coefficients(std::size_t window_len, std::size_t order, int at) {
  require(window_len % 2 == 1, ErrorKind::Config, "savgol: window length must be odd");
  require(window_len > order, ErrorKind::Config, "savgol: window length must exceed the order");
  const int half = static_cast<int>(window_len / 2);
  require(at >= -half && at <= half, ErrorKind::Config, "savgol: evaluation point outside the window");
  const auto m = static_cast<Eigen::Index>(window_len);
  const auto p = static_cast<Eigen::Index>(order + 1);
  // Abscissae scaled to [-1, 1] for conditioning.
  const double scale = half > 0 ? static_cast<double>(half) : 1.0;
  Eigen::MatrixXd design(m, p);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double t = static_cast<double>(r - half) / scale;
    double power = 1.0;
    for (Eigen::Index c = 0; c < p; ++c) {
      design(r, c) = power;
      power *= t;
    }
  }
  Eigen::RowVectorXd basis(p);
  double power = 1.0;
  for (Eigen::Index c = 0; c < p; ++c) {
    basis(c) = power;
    power *= static_cast<double>(at) / scale;
  }
  // weights = basis * pinv(design)
  const Eigen::MatrixXd pinv = design.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::RowVectorXd w = basis * pinv;
  return {w.data(), w.data() + w.size()};
}

std::vector<double> savgol_smooth(std::span<const double> x, std::size_t window_len,
                                  std::size_t order, SavgolEdge edge) {
  const auto centre = savgol_coefficients(window_len, order, 0);
  const std::size_t n = x.size();
  const std::size_t half = window_len / 2;
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;

  if (edge == SavgolEdge::Interp) {
    require(n >= window_len, ErrorKind::Config, "savgol: interp edges need at least one full window");
    for (std::size_t i = half; i + half < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < window_len; ++j) acc += centre[j] * x[i - half + j];
      out[i] = acc;
    }
    for (std::size_t i = 0; i < half; ++i) {
      const auto head = savgol_coefficients(window_len, order, static_cast<int>(i) - static_cast<int>(half));
      const auto tail = savgol_coefficients(window_len, order, static_cast<int>(half - i));
      double a = 0.0, b = 0.0;
      for (std::size_t j = 0; j < window_len; ++j) {
        a += head[j] * x[j];
        b += tail[j] * x[n - window_len + j];
      }
      out[i] = a;
      out[n - 1 - i] = b;
    }
    return out;
  }

  require(n > half, ErrorKind::Config, "savgol: signal shorter than half a window");
  auto at = [&](std::ptrdiff_t i) {
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    if (i < 0) i = -i;
    if (i > last) i = 2 * last - i;
    return x[static_cast<std::size_t>(i)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < window_len; ++j)
      acc += centre[j] * at(static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(half));
    out[i] = acc;
  }
  return out;
}

std::vector<Window> preprocess(const Signal& x, double stride_s, const PipelineConfig& config) {
  const Signal filtered = bandpass(x, config.lo, config.hi);
  const Signal resampled = resample_to_grid(filtered, config.target_fs);
  auto windows = segment_windows(resampled, config.window_s, stride_s);
  for (const Window& w : windows) check_window(w);
  return windows;
}

void check_window(const Window& w) {
  require(w.samples.size() == kWindowLength, ErrorKind::Data, "window must hold exactly 800 samples");
  for (double v : w.samples)
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::Data, "window samples must lie in [0, 1]");
}

}  // namespace deepbeat::dsp
