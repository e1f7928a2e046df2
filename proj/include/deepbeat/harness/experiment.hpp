#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/forest.hpp"
#include "deepbeat/harness/checkpoint.hpp"
#include "deepbeat/harness/dataset_io.hpp"
#include "deepbeat/metrics.hpp"

namespace deepbeat::harness {

inline constexpr std::string_view kVersion = "0.1.0";

/// FNV-1a 64 of the text, as 16 hex digits.
std::string config_digest(std::string_view text);

/// run.json next to the run's outputs: command, seed, config, its digest and
/// the library/format versions. Contains nothing time- or host-dependent.
void write_run_record(const std::filesystem::path& dir, std::string_view command, std::uint64_t seed,
                      const std::string& config_json);

/// DEEPBEAT_OUT_DIR when set, else the working directory.
std::filesystem::path default_out_dir();

baseline::FeatureMatrix feature_matrix(const DatasetBundle& b, const std::vector<std::size_t>& idx);

/// Fits the forest on the train partition.
baseline::Forest train_forest(const DatasetBundle& b, const baseline::ForestConfig& config);

std::vector<eval::EvalRecord> eval_records(const DatasetBundle& b, const std::vector<std::size_t>& idx,
                                           const std::vector<Prediction>& preds);

std::vector<Prediction> predict(net::DeepBeatModel& model, const DatasetBundle& b, const std::vector<std::size_t>& idx);
std::vector<Prediction> predict(const baseline::Forest& forest, const DatasetBundle& b,
                                const std::vector<std::size_t>& idx);

eval::MetricsReport evaluate_model(net::DeepBeatModel& model, const DatasetBundle& b, Partition p,
                                   const eval::EvalOptions& options);
eval::MetricsReport evaluate_forest(const baseline::Forest& forest, const DatasetBundle& b, Partition p,
                                    const eval::EvalOptions& options);

struct TableRow {
  std::string section;
  std::string layer;  // display name, e.g. "Conv1D"
  nn::Shape output;
  std::size_t params = 0;
  /// The one row whose count cannot equal the reference listing.
  bool exception = false;
};

/// Layer tables computed from the specs alone (no weights are allocated).
std::vector<TableRow> layer_table(ModelKind kind, cdae::Profile profile);
std::vector<TableRow> layer_table(const cdae::CdaeModel& model);
std::vector<TableRow> layer_table(const net::DeepBeatModel& model);

/// Fixed-width text: "Layer  Output Shape  Param #" rows grouped by section,
/// then the total.
std::string format_layer_table(const std::vector<TableRow>& rows);

}  // namespace deepbeat::harness
