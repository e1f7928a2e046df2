#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "deepbeat/types.hpp"

namespace deepbeat::baseline {

inline constexpr std::size_t kFeatureCount = 8;
inline constexpr std::size_t kHistogramBins = 16;

struct FeatureVector {
  double kurtosis = 0;
  double skew = 0;
  double spectral_entropy = 0;
  double zero_crossings = 0;
  double hjorth_mobility = 0;
  double hjorth_complexity = 0;
  double nrmssd = 0;
  double shannon_entropy = 0;

  std::array<double, kFeatureCount> as_array() const {
    return {kurtosis, skew, spectral_entropy, zero_crossings,
            hjorth_mobility, hjorth_complexity, nrmssd, shannon_entropy};
  }
};

const std::array<const char*, kFeatureCount>& feature_names();

FeatureVector extract_features(const Window& w);

/// The same features on a raw sample array at rate fs.
FeatureVector extract_features(std::span<const double> x, double fs);

// Individual features, exposed for testing. Entropies are in bits.
double excess_kurtosis(std::span<const double> x);
double skewness(std::span<const double> x);
double spectral_entropy(std::span<const double> x);
std::size_t zero_crossings(std::span<const double> x);
double hjorth_mobility(std::span<const double> x);
double hjorth_complexity(std::span<const double> x);
double nrmssd(std::span<const double> x, double fs);
double histogram_entropy(std::span<const double> x, std::size_t bins = kHistogramBins);

}  // namespace deepbeat::baseline
