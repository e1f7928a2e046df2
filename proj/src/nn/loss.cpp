#include "deepbeat/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "deepbeat/error.hpp"

namespace deepbeat::nn {
namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
  require(a.shape() == b.shape() && !a.empty(), ErrorKind::Shape,
          std::string(what) + ": prediction " + shape_string(a.shape()) + " vs target " + shape_string(b.shape()));
}

}  // namespace

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
  same_shape(pred, target, "mse");
  const auto n = static_cast<double>(pred.size());
  LossResult r{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.value += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.value /= n;
  return r;
}

LossResult cross_entropy_loss(const Tensor& probs, const Tensor& target) {
  same_shape(probs, target, "cross-entropy");
  require(probs.rank() == 2, ErrorKind::Shape, "cross-entropy expects [batch, classes]");
  const auto batch = static_cast<double>(probs.dim(0));
  LossResult r{0.0, Tensor(probs.shape())};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (target[i] == 0.0) continue;
    const double p = std::clamp(probs[i], kProbClip, 1.0);
    r.value -= target[i] * std::log(p);
    r.grad[i] = -target[i] / (p * batch);
  }
  r.value /= batch;
  return r;
}

Tensor softmax_ce_logit_grad(const Tensor& probs, const Tensor& target) {
  same_shape(probs, target, "cross-entropy");
  require(probs.rank() == 2, ErrorKind::Shape, "cross-entropy expects [batch, classes]");
  const auto batch = static_cast<double>(probs.dim(0));
  Tensor g(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = (probs[i] - target[i]) / batch;
  return g;
}

}  // namespace deepbeat::nn
