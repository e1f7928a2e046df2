#pragma once

#include <cstdint>
#include <vector>

#include "deepbeat/cdae.hpp"
#include "deepbeat/nn/sequential.hpp"
#include "deepbeat/types.hpp"

namespace deepbeat::net {

using cdae::Profile;

/// Layer lists of the four sections. The encoder matches the autoencoder's
/// encoder so its weights can be transferred.
struct DeepBeatSpecs {
  std::vector<nn::LayerSpec> encoder;
  std::vector<nn::LayerSpec> shared;
  std::vector<nn::LayerSpec> rhythm;
  std::vector<nn::LayerSpec> qa;
};

inline constexpr double kDropoutRate = 0.2;
inline constexpr double kLeakySlope = 0.01;

DeepBeatSpecs deepbeat_specs(Profile profile, double dropout = kDropoutRate, double slope = kLeakySlope);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_rhythm = 0, train_qa = 0, train_total = 0;
  double val_rhythm = 0, val_qa = 0, val_total = 0;
  double val_rhythm_acc = 0, val_qa_acc = 0;
};

struct DeepBeatModel {
  Profile profile = Profile::Mini;
  std::uint64_t seed = 0;
  double lambda_qa = 1.0;
  bool trained = false;
  bool pretrained = false;
  nn::Sequential encoder{nn::Shape{kWindowLength, 1}};
  nn::Sequential shared{nn::Shape{1}};
  nn::Sequential rhythm{nn::Shape{1}};
  nn::Sequential qa{nn::Shape{1}};
  std::vector<EpochRecord> history;

  std::vector<nn::Parameter*> parameters();
  std::size_t parameter_count() const;
};

/// He-initialized model; with encoder_source the three encoder convolutions
/// start from its weights.
DeepBeatModel build_deepbeat(Profile profile, std::uint64_t seed, const cdae::CdaeModel* encoder_source = nullptr);
DeepBeatModel build_deepbeat(Profile profile, std::uint64_t seed, const DeepBeatSpecs& specs);

/// Copies encoder conv kernels and biases; throws Shape on any mismatch.
void transfer_encoder(const cdae::CdaeModel& source, DeepBeatModel& target);

/// Row-major n x 800 windows with class indices (rhythm: 0 sinus / 1 AF;
/// qa: 0 excellent / 1 acceptable / 2 poor).
struct LabeledSet {
  std::vector<double> x;
  std::vector<int> rhythm;
  std::vector<int> qa;
  std::size_t count = 0;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double lambda_qa = 1.0;
  std::uint64_t seed = 1;
};

/// Minimizes CE_rhythm + lambda_qa * CE_qa and keeps the weights with the
/// lowest total validation loss. lambda_qa = 0 trains the rhythm task alone.
void train_deepbeat(DeepBeatModel& model, const LabeledSet& train, const LabeledSet& val, const TrainConfig& config);

/// Deterministic inference (dropout off, batch norm on running statistics).
std::vector<Prediction> infer(DeepBeatModel& model, const std::vector<double>& windows, std::size_t count);
Prediction infer(DeepBeatModel& model, const Window& w);

/// Output of encoder + shared block for a batch [B, 800, 1].
nn::Tensor forward_trunk(DeepBeatModel& model, const nn::Tensor& x, const nn::RunContext& ctx);

}  // namespace deepbeat::net
