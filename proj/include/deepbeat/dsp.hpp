#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deepbeat/types.hpp"

namespace deepbeat::dsp {

/// (x - min) / (max - min); all zeros for a constant input.
std::vector<double> normalize01(std::span<const double> x);

/// Transposed direct-form-II biquad coefficients (a0 normalized to 1).
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

Biquad butterworth_lowpass(double cutoff, double fs);
Biquad butterworth_highpass(double cutoff, double fs);

/// Runs the cascade forward and backward with odd-reflection padding and
/// steady-state initial conditions, giving zero phase and squared magnitude.
std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x,
                             std::size_t padlen);

/// 2nd-order Butterworth high-pass at lo cascaded with 2nd-order low-pass at
/// hi, applied forward-backward.
Signal bandpass(const Signal& x, double lo = 0.5, double hi = 8.0);

/// Integer ratios decimate; other ratios interpolate linearly onto the target grid.
Signal resample_to_grid(const Signal& x, double target_fs = kWindowFs);

/// Fixed-length windows, each normalized independently. Trailing partial
/// segments are dropped; a signal shorter than one window yields none.
std::vector<Window> segment_windows(const Signal& x, double window_s, double stride_s);

inline constexpr double kTrainStride = 12.5;
inline constexpr double kEvalStride = 25.0;
inline constexpr double kRefractorySeconds = 0.27;
inline constexpr double kPeakPercentile = 60.0;

/// Local maxima above the 60th percentile that dominate a +/-0.27 s
/// neighbourhood. Ties within a neighbourhood resolve to the earliest sample.
std::vector<std::size_t> detect_peaks(std::span<const double> x, double fs,
                                      double refractory_s = kRefractorySeconds,
                                      double percentile = kPeakPercentile);

/// Linear-interpolated percentile (numpy's default rule).
double percentile(std::span<const double> x, double q);

enum class SavgolEdge {
  Mirror,  // reflect about the end samples, end samples not repeated
  Interp,  // fit the edge window once and evaluate the polynomial there
};

/// Least-squares weights estimating the value at offset `at` (in samples,
/// relative to the window centre) from a window of `window_len` samples.
std::vector<double> savgol_coefficients(std::size_t window_len, std::size_t order, int at = 0);

std::vector<double> savgol_smooth(std::span<const double> x, std::size_t window_len,
                                  std::size_t order = 3, SavgolEdge edge = SavgolEdge::Mirror);

struct PipelineConfig {
  double lo = 0.5;
  double hi = 8.0;
  double target_fs = kWindowFs;
  double window_s = kWindowSeconds;
};

/// bandpass -> resample -> segment -> normalize, in that fixed order.
std::vector<Window> preprocess(const Signal& x, double stride_s, const PipelineConfig& config = {});

/// Throws Data when w violates the Window invariants.
void check_window(const Window& w);

}  // namespace deepbeat::dsp
