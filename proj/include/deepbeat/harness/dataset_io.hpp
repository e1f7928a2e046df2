#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepbeat/cdae.hpp"
#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/sim.hpp"
#include "deepbeat/types.hpp"

namespace deepbeat::harness {

inline constexpr int kDatasetVersion = 1;

struct WindowLabel {
  std::string window_id;
  std::string subject_id;
  Partition partition = Partition::Train;
  Rhythm rhythm = Rhythm::Sinus;
  Quality qa = Quality::Excellent;
  std::string episode_id;
  double noise_factor = 0.0;

  friend bool operator==(const WindowLabel&, const WindowLabel&) = default;
};

/// Windows at storage precision plus labels. `clean` holds the uncorrupted
/// counterpart of every window when the source was simulated.
struct DatasetBundle {
  std::size_t window_length = kWindowLength;
  double fs = kWindowFs;
  double source_fs = 128.0;
  std::uint64_t seed = 0;
  std::vector<float> windows;
  std::vector<float> clean;
  std::vector<WindowLabel> labels;

  std::size_t count() const { return labels.size(); }
  std::vector<double> window(std::size_t i) const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

/// Simulates the recipe and runs every signal through the preprocessing
/// pipeline (training stride for the train partition, evaluation stride
/// otherwise).
DatasetBundle build_dataset(const sim::DatasetRecipe& recipe);

/// Directory with manifest.json, windows.f32, clean.f32 (when present) and labels.tsv.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_dataset(const std::filesystem::path& dir);

/// Indices of the windows in a partition, in stored order.
std::vector<std::size_t> partition_indices(const DatasetBundle& b, Partition p);

std::vector<double> gather_windows(const DatasetBundle& b, const std::vector<std::size_t>& idx);
net::LabeledSet labeled_set(const DatasetBundle& b, Partition p);
/// Throws Data when the bundle carries no clean targets.
cdae::PairSet pair_set(const DatasetBundle& b, Partition p);

}  // namespace deepbeat::harness
