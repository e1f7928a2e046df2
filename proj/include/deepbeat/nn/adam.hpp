#pragma once

#include <cstdint>
#include <vector>

#include "deepbeat/nn/layers.hpp"

namespace deepbeat::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are keyed by position in the parameter
/// list, so every step must pass the same list. Updated values are rounded to
/// float precision unless round_weights is off.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}, bool round_weights = true);

  void step(const std::vector<Parameter*>& params);

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  bool round_weights_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace deepbeat::nn
