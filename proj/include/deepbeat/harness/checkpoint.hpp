#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "deepbeat/cdae.hpp"
#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/forest.hpp"

namespace deepbeat::harness {

inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { Cdae, DeepBeat, Forest };

std::string_view to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view s);

/// Directory with manifest.json (kind, profile, layer lists, training
/// configuration, seed, tensor table) and weights.bin (tensors in declaration
/// order, little-endian). training_json must be a JSON object or empty.
void save_checkpoint(const cdae::CdaeModel& model, const std::filesystem::path& dir,
                     const std::string& training_json = "");
void save_checkpoint(const net::DeepBeatModel& model, const std::filesystem::path& dir,
                     const std::string& training_json = "");
void save_checkpoint(const baseline::Forest& forest, const std::filesystem::path& dir,
                     const std::string& training_json = "");

/// Reads only the manifest.
ModelKind checkpoint_kind(const std::filesystem::path& dir);

cdae::CdaeModel load_cdae(const std::filesystem::path& dir);
net::DeepBeatModel load_deepbeat(const std::filesystem::path& dir);
baseline::Forest load_forest(const std::filesystem::path& dir);

}  // namespace deepbeat::harness
