#pragma once

#include "deepbeat/nn/tensor.hpp"

namespace deepbeat::nn {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // dL/dpred, same shape as pred
};

/// Mean of squared differences over every element.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

/// Cross-entropy on probabilities [B, K] against one-hot targets, averaged
/// over the batch. Probabilities are clipped to [1e-12, 1].
LossResult cross_entropy_loss(const Tensor& probs, const Tensor& target);

/// Gradient of cross_entropy_loss(softmax(z)) with respect to the logits z,
/// (p - y) / B. Used when the softmax is fused into the last dense layer.
Tensor softmax_ce_logit_grad(const Tensor& probs, const Tensor& target);

constexpr double kProbClip = 1e-12;

}  // namespace deepbeat::nn
