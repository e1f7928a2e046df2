#pragma once
// Central-difference gradient checks shared by the network tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "deepbeat/nn/sequential.hpp"

namespace testutil {

using deepbeat::nn::Tensor;

inline Tensor random_tensor(const deepbeat::nn::Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(shape);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

/// ||a - n|| / max(||a|| + ||n||, tiny) of analytic vs numeric gradients.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double d = 0, sa = 0, sn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - n[i]) * (a[i] - n[i]);
    sa += a[i] * a[i];
    sn += n[i] * n[i];
  }
  return std::sqrt(d) / std::max(std::sqrt(sa) + std::sqrt(sn), 1e-12);
}

/// Numeric derivative of f with respect to every element of v.
inline std::vector<double> numeric_grad(std::span<double> v, const std::function<double()>& f, double h = 1e-6) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = f();
    v[i] = keep - h;
    const double down = f();
    v[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

struct GradReport {
  double input = 0;
  double params = 0;  // worst over parameter tensors
};

/// Loss = sum(out * r) with a fixed random r; checks d/dx and d/dparams.
inline GradReport check_sequential(deepbeat::nn::Sequential& net, Tensor x, const deepbeat::nn::RunContext& ctx,
                                   std::mt19937_64& rng) {
  Tensor probe = net.forward(x, ctx);
  const Tensor r = random_tensor(probe.shape(), rng);
  const auto loss = [&] {
    const Tensor out = net.forward(x, ctx);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
    return s;
  };
  net.zero_grad();
  net.forward(x, ctx);
  const Tensor gx = net.backward(r);
  GradReport rep;
  rep.input = rel_error({gx.values().begin(), gx.values().end()}, numeric_grad(x.values(), loss));
  for (auto* p : net.parameters()) {
    if (!p->trainable) continue;
    const std::vector<double> analytic(p->grad.values().begin(), p->grad.values().end());
    rep.params = std::max(rep.params, rel_error(analytic, numeric_grad(p->value.values(), loss)));
  }
  return rep;
}

}  // namespace testutil
