#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "deepbeat/features.hpp"
#include "deepbeat/types.hpp"

namespace deepbeat::baseline {

/// Flat node table. Leaves have feature == -1; counts hold the per-class
/// (bootstrap-weighted) sample counts reaching each node.
struct Tree {
  std::size_t n_classes = 0;
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> counts;  // nodes x n_classes

  std::size_t node_count() const { return feature.size(); }
  /// Leaf class frequencies for x.
  std::vector<double> leaf_distribution(std::span<const double> x) const;
};

/// Gini-split trees over bootstrap samples, one ensemble per target.
struct Ensemble {
  std::size_t n_classes = 0;
  std::vector<Tree> trees;

  std::vector<double> predict_proba(std::span<const double> x) const;
};

struct ForestConfig {
  std::size_t n_estimators = 100;
  std::uint64_t seed = 1;
  /// Features tried per split; 0 means floor(sqrt(d)).
  std::size_t max_features = 0;
  bool bootstrap = true;
};

using FeatureMatrix = std::vector<std::array<double, kFeatureCount>>;

struct Forest {
  ForestConfig config;
  std::size_t n_features = kFeatureCount;
  Ensemble rhythm;
  Ensemble qa;
};

struct ForestPrediction {
  std::array<double, kRhythmClasses> rhythm{};
  std::array<double, kQualityClasses> qa{};
};

/// Fits one ensemble on a generic design matrix (rows of length d) with
/// integer labels in [0, n_classes). stream separates the per-target RNGs.
Ensemble fit_ensemble(std::span<const std::vector<double>> rows, std::span<const int> labels,
                      std::size_t n_classes, const ForestConfig& config, std::uint64_t stream);

Forest fit_forest(const FeatureMatrix& X, std::span<const Rhythm> rhythm, std::span<const Quality> qa,
                  const ForestConfig& config = {});

ForestPrediction predict_forest(const Forest& f, const FeatureVector& x);
ForestPrediction predict_forest(const Forest& f, std::span<const double> x);

}  // namespace deepbeat::baseline
