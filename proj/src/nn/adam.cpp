#include "deepbeat/nn/adam.hpp"

#include <cmath>

#include "deepbeat/error.hpp"

namespace deepbeat::nn {

Adam::Adam(AdamConfig config, bool round_weights) : config_(config), round_weights_(round_weights) {
  require(config.lr > 0.0 && config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 &&
              config.beta2 < 1.0 && config.epsilon > 0.0,
          ErrorKind::Config, "adam: invalid hyperparameters");
}

void Adam::step(const std::vector<Parameter*>& params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  require(m_.size() == params.size(), ErrorKind::State, "adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    require(p.grad.shape() == m_[k].shape(), ErrorKind::Shape, "adam: gradient shape changed");
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      double w = p.value[i] - config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
      if (round_weights_) w = static_cast<double>(static_cast<float>(w));
      p.value[i] = w;
    }
  }
}

}  // namespace deepbeat::nn
