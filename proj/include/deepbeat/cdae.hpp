#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "deepbeat/nn/sequential.hpp"
#include "deepbeat/types.hpp"

namespace deepbeat::cdae {

/// "paper" is the full-width architecture; "mini" quarters every conv width
/// (and the 175-unit dense layers) but keeps the topology.
enum class Profile { Paper, Mini };

std::string_view to_string(Profile p);
std::optional<Profile> parse_profile(std::string_view s);

/// Width of a layer under the profile: paper widths unchanged, mini (c+2)/4.
std::size_t scaled_width(Profile p, std::size_t paper_width);

/// Encoder: three conv (k = 10, 8, 5) + max-pool (3, 3, 2) blocks, 800 -> 44.
std::vector<nn::LayerSpec> encoder_specs(Profile p);
/// Decoder: conv (k = 5, 8, 10) + upsample (2, 3, 3), flatten, dense to 800.
std::vector<nn::LayerSpec> decoder_specs(Profile p);

inline constexpr std::size_t kEncoderLayers = 6;

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;
};

struct CdaeModel {
  Profile profile = Profile::Mini;
  std::uint64_t seed = 0;
  nn::Sequential net{nn::Shape{kWindowLength, 1}};
  bool trained = false;
  std::vector<EpochRecord> history;
};

CdaeModel build_cdae(Profile profile, std::uint64_t seed);

/// Rebuilds a model around an explicit layer list (checkpoint loading).
CdaeModel build_cdae(Profile profile, std::uint64_t seed, const std::vector<nn::LayerSpec>& specs);

/// Row-major n x 800 input/target pairs.
struct PairSet {
  std::vector<double> noisy;
  std::vector<double> clean;
  std::size_t count = 0;
};

/// Multiplies the learning rate by `factor` once the monitored loss has not
/// improved for `patience` epochs, never going below min_lr.
class PlateauSchedule {
 public:
  PlateauSchedule(std::size_t patience, double factor, double min_lr);
  /// Returns the learning rate to use from the next epoch on.
  double observe(double loss, double lr);
  bool reduced_last() const { return reduced_; }

 private:
  std::size_t patience_;
  double factor_, min_lr_;
  double best_;
  std::size_t wait_ = 0;
  bool reduced_ = false;
};

struct PretrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t patience = 25;
  double lr_factor = 0.1;
  double min_lr = 1e-6;
  std::uint64_t seed = 1;
};

/// Minimizes MSE(net(noisy), clean); keeps the weights of the best
/// validation epoch. An empty validation set monitors the training loss.
void pretrain(CdaeModel& model, const PairSet& train, const PairSet& val, const PretrainConfig& config);

/// Encoder output, [n, 44, 50] under the paper profile.
nn::Tensor encode(CdaeModel& model, const std::vector<double>& windows, std::size_t count);
/// Full reconstruction, [n, 800].
nn::Tensor denoise(CdaeModel& model, const std::vector<double>& windows, std::size_t count);

/// Mean squared error over all elements of two equally sized arrays.
double mse(const std::vector<double>& a, const std::vector<double>& b);

/// Infer-mode forward in chunks over layers [0, end) of a stack whose input is
/// [800, 1]. Used by both model families.
nn::Tensor forward_windows(nn::Sequential& net, const std::vector<double>& windows, std::size_t count,
                           std::size_t end);

}  // namespace deepbeat::cdae
