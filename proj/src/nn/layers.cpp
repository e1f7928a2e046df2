#include "deepbeat/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "deepbeat/error.hpp"
#include "deepbeat/parallel.hpp"

namespace deepbeat::nn {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

// Column-block width for the large dense products. Fixed so the arithmetic is
// identical for every thread count.
constexpr std::size_t kBlock = 256;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void apply_activation(Activation act, double slope, Tensor& z, std::size_t last_dim) {
  auto v = z.values();
  switch (act) {
    case Activation::Linear:
      return;
    case Activation::ReLU:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      return;
    case Activation::LeakyReLU:
      for (double& x : v) x = x > 0.0 ? x : slope * x;
      return;
    case Activation::Softmax: {
      for (std::size_t r = 0; r < v.size(); r += last_dim) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < last_dim; ++c) mx = std::max(mx, v[r + c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < last_dim; ++c) {
          v[r + c] = std::exp(v[r + c] - mx);
          sum += v[r + c];
        }
        for (std::size_t c = 0; c < last_dim; ++c) v[r + c] /= sum;
      }
      return;
    }
  }
}

// g <- dL/dz given g = dL/dy, pre-activation z and output y.
void activation_backward(Activation act, double slope, const Tensor& z, const Tensor& y, Tensor& g,
                         std::size_t last_dim) {
  auto gv = g.values();
  switch (act) {
    case Activation::Linear:
      return;
    case Activation::ReLU:
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (!(z[i] > 0.0)) gv[i] = 0.0;
      return;
    case Activation::LeakyReLU:
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (!(z[i] > 0.0)) gv[i] *= slope;
      return;
    case Activation::Softmax:
      for (std::size_t r = 0; r < gv.size(); r += last_dim) {
        double dot = 0.0;
        for (std::size_t c = 0; c < last_dim; ++c) dot += gv[r + c] * y[r + c];
        for (std::size_t c = 0; c < last_dim; ++c) gv[r + c] = y[r + c] * (gv[r + c] - dot);
      }
      return;
  }
}

Shape batched(std::size_t batch, const Shape& s) {
  Shape out{batch};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

// Column sums of a row-major (rows x cols) block in row order. Eigen's
// vectorized colwise() reduction picks its summation order from the buffer
// alignment, which would make bias gradients depend on the heap.
void add_column_sums(const double* g, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += g[r * cols + c];
}

// ---------------------------------------------------------------------------

class Conv1DLayer final : public Layer {
 public:
  Conv1DLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    length_ = in[0];
    in_channels_ = in[1];
    out_length_ = output_shape_[0];
    const std::size_t k = spec.kernel;
    if (spec.padding == Padding::Same) {
      const std::size_t need = (out_length_ - 1) * spec.stride + k;
      pad_left_ = need > length_ ? (need - length_) / 2 : 0;
    }
    kernel_.name = "kernel";
    kernel_.value = Tensor({k, in_channels_, spec.filters});
    kernel_.grad = Tensor({k, in_channels_, spec.filters});
    bias_.name = "bias";
    bias_.value = Tensor({spec.filters});
    bias_.grad = Tensor({spec.filters});
  }

  void initialize(Rng& rng) override {
    kernel_.value = he_init(kernel_.value.shape(), spec_.kernel * in_channels_, rng);
    bias_.value.fill(0.0);
  }

  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }

  Tensor forward(const Tensor& x, const RunContext&) override {
    batch_ = check_batch(x);
    const std::size_t k = spec_.kernel, cin = in_channels_, cols = k * cin;
    const std::size_t rows = batch_ * out_length_;
    cols_.assign(rows * cols, 0.0);
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* xb = x.data() + b * length_ * cin;
      for (std::size_t o = 0; o < out_length_; ++o) {
        double* row = cols_.data() + (b * out_length_ + o) * cols;
        const std::ptrdiff_t origin =
            static_cast<std::ptrdiff_t>(o * spec_.stride) - static_cast<std::ptrdiff_t>(pad_left_);
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t pos = origin + static_cast<std::ptrdiff_t>(j);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length_)) continue;
          std::copy_n(xb + static_cast<std::size_t>(pos) * cin, cin, row + j * cin);
        }
      }
    }
    pre_ = Tensor(batched(batch_, output_shape_));
    CMapR colm(cols_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    CMapR w(kernel_.value.data(), static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(spec_.filters));
    MapR z(pre_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec_.filters));
    z.noalias() = colm * w;
    const Eigen::Map<const Eigen::RowVectorXd> bias(bias_.value.data(), static_cast<Eigen::Index>(spec_.filters));
    z.rowwise() += bias;
    out_ = pre_;
    apply_activation(spec_.activation, spec_.slope, out_, spec_.filters);
    return out_;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor g = grad_out;
    activation_backward(spec_.activation, spec_.slope, pre_, out_, g, spec_.filters);
    const std::size_t k = spec_.kernel, cin = in_channels_, cols = k * cin;
    const std::size_t rows = batch_ * out_length_;
    const auto R = static_cast<Eigen::Index>(rows), C = static_cast<Eigen::Index>(cols),
               F = static_cast<Eigen::Index>(spec_.filters);
    CMapR gz(g.data(), R, F);
    CMapR colm(cols_.data(), R, C);
    MapR dw(kernel_.grad.data(), C, F);
    dw.noalias() += colm.transpose() * gz;
    add_column_sums(g.data(), rows, spec_.filters, bias_.grad.data());

    std::vector<double> dcols(rows * cols);
    MapR dc(dcols.data(), R, C);
    CMapR w(kernel_.value.data(), C, F);
    dc.noalias() = gz * w.transpose();

    Tensor dx(batched(batch_, input_shape_));
    for (std::size_t b = 0; b < batch_; ++b) {
      double* xb = dx.data() + b * length_ * cin;
      for (std::size_t o = 0; o < out_length_; ++o) {
        const double* row = dcols.data() + (b * out_length_ + o) * cols;
        const std::ptrdiff_t origin =
            static_cast<std::ptrdiff_t>(o * spec_.stride) - static_cast<std::ptrdiff_t>(pad_left_);
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t pos = origin + static_cast<std::ptrdiff_t>(j);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length_)) continue;
          double* dst = xb + static_cast<std::size_t>(pos) * cin;
          for (std::size_t c = 0; c < cin; ++c) dst[c] += row[j * cin + c];
        }
      }
    }
    return dx;
  }

 private:
  std::size_t length_ = 0, in_channels_ = 0, out_length_ = 0, pad_left_ = 0, batch_ = 0;
  Parameter kernel_, bias_;
  std::vector<double> cols_;
  Tensor pre_, out_;
};

// ---------------------------------------------------------------------------

}  // namespace

class DenseLayer final : public Layer {
 public:
  DenseLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    inputs_ = in[0];
    kernel_.name = "kernel";
    kernel_.value = Tensor({inputs_, spec.units});
    kernel_.grad = Tensor({inputs_, spec.units});
    bias_.name = "bias";
    bias_.value = Tensor({spec.units});
    bias_.grad = Tensor({spec.units});
  }

  void initialize(Rng& rng) override {
    kernel_.value = he_init(kernel_.value.shape(), inputs_, rng);
    bias_.value.fill(0.0);
  }

  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }

  Tensor forward(const Tensor& x, const RunContext&) override {
    batch_ = check_batch(x);
    input_ = x;
    const auto B = static_cast<Eigen::Index>(batch_), N = static_cast<Eigen::Index>(inputs_),
               M = static_cast<Eigen::Index>(spec_.units);
    pre_ = Tensor({batch_, spec_.units});
    CMapR xm(input_.data(), B, N);
    CMapR w(kernel_.value.data(), N, M);
    MapR z(pre_.data(), B, M);
    parallel_for(ceil_div(spec_.units, kBlock), [&](std::size_t blk) {
      const auto c0 = static_cast<Eigen::Index>(blk * kBlock);
      const auto width = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlock), M - c0);
      z.middleCols(c0, width).noalias() = xm * w.middleCols(c0, width);
    });
    const Eigen::Map<const Eigen::RowVectorXd> bias(bias_.value.data(), M);
    z.rowwise() += bias;
    out_ = pre_;
    apply_activation(spec_.activation, spec_.slope, out_, spec_.units);
    return out_;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor g = grad_out;
    activation_backward(spec_.activation, spec_.slope, pre_, out_, g, spec_.units);
    return backward_linear(g);
  }

  Tensor backward_linear(const Tensor& g) {
    const auto B = static_cast<Eigen::Index>(batch_), N = static_cast<Eigen::Index>(inputs_),
               M = static_cast<Eigen::Index>(spec_.units);
    require(g.size() == static_cast<std::size_t>(B * M), ErrorKind::Shape, "dense: gradient shape mismatch");
    CMapR gz(g.data(), B, M);
    CMapR xm(input_.data(), B, N);
    MapR dw(kernel_.grad.data(), N, M);
    CMapR w(kernel_.value.data(), N, M);
    parallel_for(ceil_div(spec_.units, kBlock), [&](std::size_t blk) {
      const auto c0 = static_cast<Eigen::Index>(blk * kBlock);
      const auto width = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlock), M - c0);
      dw.middleCols(c0, width).noalias() += xm.transpose() * gz.middleCols(c0, width);
    });
    add_column_sums(g.data(), batch_, spec_.units, bias_.grad.data());

    Tensor dx({batch_, inputs_});
    MapR dxm(dx.data(), B, N);
    parallel_for(ceil_div(inputs_, kBlock), [&](std::size_t blk) {
      const auto r0 = static_cast<Eigen::Index>(blk * kBlock);
      const auto width = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlock), N - r0);
      dxm.middleCols(r0, width).noalias() = gz * w.middleRows(r0, width).transpose();
    });
    return dx;
  }

  const Tensor& logits() const { return pre_; }

 private:
  std::size_t inputs_ = 0, batch_ = 0;
  Parameter kernel_, bias_;
  Tensor input_, pre_, out_;
};

namespace {

// ---------------------------------------------------------------------------

class MaxPoolLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x, const RunContext&) override {
    batch_ = check_batch(x);
    const std::size_t L = input_shape_[0], C = input_shape_[1], Lo = output_shape_[0], p = spec_.pool;
    Tensor y(batched(batch_, output_shape_));
    argmax_.assign(y.size(), 0);
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t o = 0; o < Lo; ++o)
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = (b * L + o * p) * C + c;
          for (std::size_t j = 1; j < p; ++j) {
            const std::size_t idx = (b * L + o * p + j) * C + c;
            if (x[idx] > x[best]) best = idx;
          }
          const std::size_t out = (b * Lo + o) * C + c;
          y[out] = x[best];
          argmax_[out] = best;
        }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    Tensor dx(batched(batch_, input_shape_));
    for (std::size_t i = 0; i < g.size(); ++i) dx[argmax_[i]] += g[i];
    return dx;
  }

 private:
  std::size_t batch_ = 0;
  std::vector<std::size_t> argmax_;
};

class UpSampleLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x, const RunContext&) override {
    batch_ = check_batch(x);
    const std::size_t L = input_shape_[0], C = input_shape_[1], u = spec_.factor;
    Tensor y(batched(batch_, output_shape_));
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t r = 0; r < u; ++r)
          std::copy_n(x.data() + (b * L + l) * C, C, y.data() + (b * L * u + l * u + r) * C);
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t L = input_shape_[0], C = input_shape_[1], u = spec_.factor;
    Tensor dx(batched(batch_, input_shape_));
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t r = 0; r < u; ++r)
          for (std::size_t c = 0; c < C; ++c) dx[(b * L + l) * C + c] += g[(b * L * u + l * u + r) * C + c];
    return dx;
  }

 private:
  std::size_t batch_ = 0;
};

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x, const RunContext&) override {
    batch_ = check_batch(x);
    return x.reshaped(batched(batch_, output_shape_));
  }

  Tensor backward(const Tensor& g) override { return g.reshaped(batched(batch_, input_shape_)); }

 private:
  std::size_t batch_ = 0;
};

class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    channels_ = in.back();
    auto make = [&](const char* name, double fill, bool trainable) {
      Parameter p;
      p.name = name;
      p.value = Tensor({channels_}, fill);
      p.grad = Tensor({channels_});
      p.trainable = trainable;
      return p;
    };
    gamma_ = make("gamma", 1.0, true);
    beta_ = make("beta", 0.0, true);
    moving_mean_ = make("moving_mean", 0.0, false);
    moving_var_ = make("moving_variance", 1.0, false);
  }

  void initialize(Rng&) override {
    gamma_.value.fill(1.0);
    beta_.value.fill(0.0);
    moving_mean_.value.fill(0.0);
    moving_var_.value.fill(1.0);
  }

  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_, &moving_mean_, &moving_var_}; }

  Tensor forward(const Tensor& x, const RunContext& ctx) override {
    check_batch(x);
    const std::size_t C = channels_, rows = x.size() / C;
    train_ = ctx.mode == Mode::Train;
    xhat_ = Tensor(x.shape());
    inv_std_.assign(C, 0.0);
    Tensor y(x.shape());
    if (train_) {
      std::vector<double> mean(C, 0.0), var(C, 0.0);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < C; ++c) mean[c] += x[r * C + c];
      for (double& m : mean) m /= static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const double d = x[r * C + c] - mean[c];
          var[c] += d * d;
        }
      for (std::size_t c = 0; c < C; ++c) {
        var[c] /= static_cast<double>(rows);
        inv_std_[c] = 1.0 / std::sqrt(var[c] + spec_.epsilon);
        // Running statistics live at storage precision, like the weights.
        moving_mean_.value[c] = static_cast<float>(spec_.momentum * moving_mean_.value[c] +
                                                   (1.0 - spec_.momentum) * mean[c]);
        moving_var_.value[c] = static_cast<float>(spec_.momentum * moving_var_.value[c] +
                                                  (1.0 - spec_.momentum) * var[c]);
      }
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < C; ++c) xhat_[r * C + c] = (x[r * C + c] - mean[c]) * inv_std_[c];
    } else {
      for (std::size_t c = 0; c < C; ++c) inv_std_[c] = 1.0 / std::sqrt(moving_var_.value[c] + spec_.epsilon);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < C; ++c)
          xhat_[r * C + c] = (x[r * C + c] - moving_mean_.value[c]) * inv_std_[c];
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c) y[r * C + c] = gamma_.value[c] * xhat_[r * C + c] + beta_.value[c];
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t C = channels_, rows = g.size() / C;
    Tensor dx(g.shape());
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        sum_g[c] += g[r * C + c];
        sum_gx[c] += g[r * C + c] * xhat_[r * C + c];
      }
    for (std::size_t c = 0; c < C; ++c) {
      gamma_.grad[c] += sum_gx[c];
      beta_.grad[c] += sum_g[c];
    }
    if (train_) {
      const auto n = static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const double k = gamma_.value[c] * inv_std_[c] / n;
          dx[r * C + c] = k * (n * g[r * C + c] - sum_g[c] - xhat_[r * C + c] * sum_gx[c]);
        }
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < C; ++c) dx[r * C + c] = g[r * C + c] * gamma_.value[c] * inv_std_[c];
    }
    return dx;
  }

 private:
  std::size_t channels_ = 0;
  bool train_ = false;
  Parameter gamma_, beta_, moving_mean_, moving_var_;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class DropoutLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x, const RunContext& ctx) override {
    check_batch(x);
    active_ = ctx.mode == Mode::Train && spec_.rate > 0.0;
    if (!active_) return x;
    Rng rng = make_rng(ctx.dropout_seed, {salt_});
    std::bernoulli_distribution keep(1.0 - spec_.rate);
    const double scale = 1.0 / (1.0 - spec_.rate);
    mask_.assign(x.size(), 0.0);
    Tensor y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = keep(rng) ? scale : 0.0;
      y[i] *= mask_[i];
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    if (!active_) return g;
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    return dx;
  }

 private:
  bool active_ = false;
  std::vector<double> mask_;
};

class ActivationLayer final : public Layer {
 public:
  ActivationLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    switch (spec.kind) {
      case LayerKind::ReLU: act_ = Activation::ReLU; break;
      case LayerKind::LeakyReLU: act_ = Activation::LeakyReLU; break;
      default: act_ = Activation::Softmax; break;
    }
  }

  Tensor forward(const Tensor& x, const RunContext&) override {
    check_batch(x);
    pre_ = x;
    out_ = x;
    apply_activation(act_, spec_.slope, out_, input_shape_.back());
    return out_;
  }

  Tensor backward(const Tensor& g) override {
    Tensor dx = g;
    activation_backward(act_, spec_.slope, pre_, out_, dx, input_shape_.back());
    return dx;
  }

 private:
  Activation act_ = Activation::ReLU;
  Tensor pre_, out_;
};

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::MaxPool1D: return "maxpool1d";
    case LayerKind::UpSample1D: return "upsample1d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::ReLU: return "relu";
    case LayerKind::LeakyReLU: return "leakyrelu";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

std::string_view display_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1D: return "Conv1D";
    case LayerKind::MaxPool1D: return "MaxPooling";
    case LayerKind::UpSample1D: return "UpSampling";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::BatchNorm: return "BatchNormalization";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::LeakyReLU: return "Leaky ReLu";
    case LayerKind::Softmax: return "Softmax";
  }
  return "Unknown";
}

std::string_view to_string(Padding p) { return p == Padding::Same ? "same" : "valid"; }

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leakyrelu";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view s) {
  for (LayerKind k : {LayerKind::Conv1D, LayerKind::MaxPool1D, LayerKind::UpSample1D, LayerKind::Dense,
                      LayerKind::Flatten, LayerKind::BatchNorm, LayerKind::Dropout, LayerKind::ReLU,
                      LayerKind::LeakyReLU, LayerKind::Softmax})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::optional<Padding> parse_padding(std::string_view s) {
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  return std::nullopt;
}

std::optional<Activation> parse_activation(std::string_view s) {
  for (Activation a : {Activation::Linear, Activation::ReLU, Activation::LeakyReLU, Activation::Softmax})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t kernel, std::size_t stride, Padding padding,
                            Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Conv1D;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t pool) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool1D;
  s.pool = pool;
  return s;
}

LayerSpec LayerSpec::upsample(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::UpSample1D;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec LayerSpec::batch_norm(double momentum, double epsilon) {
  LayerSpec s;
  s.kind = LayerKind::BatchNorm;
  s.momentum = momentum;
  s.epsilon = epsilon;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::Dropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::ReLU;
  return s;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
  LayerSpec s;
  s.kind = LayerKind::LeakyReLU;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  return s;
}

Shape infer_output_shape(const LayerSpec& spec, const Shape& in) {
  auto need_rank = [&](std::size_t rank) {
    require(in.size() == rank, ErrorKind::Shape,
            std::string(to_string(spec.kind)) + ": expected rank-" + std::to_string(rank) + " input, got " +
                shape_string(in));
  };
  for (std::size_t d : in) require(d > 0, ErrorKind::Shape, "layer input has a zero dimension");
  switch (spec.kind) {
    case LayerKind::Conv1D: {
      need_rank(2);
      require(spec.filters > 0 && spec.kernel > 0 && spec.stride > 0, ErrorKind::Config,
              "conv1d: filters, kernel and stride must be positive");
      const std::size_t L = in[0];
      std::size_t out = 0;
      if (spec.padding == Padding::Same) {
        out = ceil_div(L, spec.stride);
      } else {
        require(L >= spec.kernel, ErrorKind::Shape, "conv1d: valid padding needs length >= kernel");
        out = (L - spec.kernel) / spec.stride + 1;
      }
      return {out, spec.filters};
    }
    case LayerKind::MaxPool1D:
      need_rank(2);
      require(spec.pool > 0, ErrorKind::Config, "maxpool1d: pool size must be positive");
      require(in[0] >= spec.pool, ErrorKind::Shape, "maxpool1d: input shorter than the pool");
      return {in[0] / spec.pool, in[1]};
    case LayerKind::UpSample1D:
      need_rank(2);
      require(spec.factor > 0, ErrorKind::Config, "upsample1d: factor must be positive");
      return {in[0] * spec.factor, in[1]};
    case LayerKind::Dense:
      need_rank(1);
      require(spec.units > 0, ErrorKind::Config, "dense: units must be positive");
      return {spec.units};
    case LayerKind::Flatten:
      return {shape_size(in)};
    case LayerKind::BatchNorm:
      require(spec.epsilon > 0.0 && spec.momentum >= 0.0 && spec.momentum < 1.0, ErrorKind::Config,
              "batchnorm: epsilon must be positive and momentum in [0, 1)");
      return in;
    case LayerKind::Dropout:
      require(spec.rate >= 0.0 && spec.rate < 1.0, ErrorKind::Config, "dropout: rate must lie in [0, 1)");
      return in;
    case LayerKind::ReLU:
    case LayerKind::Softmax:
      return in;
    case LayerKind::LeakyReLU:
      require(spec.slope >= 0.0, ErrorKind::Config, "leakyrelu: slope must be non-negative");
      return in;
  }
  fail(ErrorKind::Config, "unknown layer kind");
}

std::size_t parameter_count(const LayerSpec& spec, const Shape& in) {
  infer_output_shape(spec, in);  // validates
  switch (spec.kind) {
    case LayerKind::Conv1D: return (spec.kernel * in[1] + 1) * spec.filters;
    case LayerKind::Dense: return (in[0] + 1) * spec.units;
    case LayerKind::BatchNorm: return 4 * in.back();
    default: return 0;
  }
}

Layer::Layer(LayerSpec spec, Shape input_shape)
    : spec_(std::move(spec)), input_shape_(std::move(input_shape)) {
  output_shape_ = infer_output_shape(spec_, input_shape_);
}

std::vector<const Parameter*> Layer::parameters() const {
  auto params = const_cast<Layer*>(this)->parameters();
  return {params.begin(), params.end()};
}

std::size_t Layer::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

std::size_t Layer::check_batch(const Tensor& x) const {
  const Shape& s = x.shape();
  bool ok = s.size() == input_shape_.size() + 1 && s[0] > 0;
  for (std::size_t i = 0; ok && i < input_shape_.size(); ++i) ok = s[i + 1] == input_shape_[i];
  require(ok, ErrorKind::Shape,
          std::string(to_string(spec_.kind)) + ": expected batch of " + shape_string(input_shape_) +
              ", got tensor of rank " + std::to_string(s.size()));
  return s[0];
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape) {
  switch (spec.kind) {
    case LayerKind::Conv1D: return std::make_unique<Conv1DLayer>(spec, input_shape);
    case LayerKind::MaxPool1D: return std::make_unique<MaxPoolLayer>(spec, input_shape);
    case LayerKind::UpSample1D: return std::make_unique<UpSampleLayer>(spec, input_shape);
    case LayerKind::Dense: return std::make_unique<DenseLayer>(spec, input_shape);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer>(spec, input_shape);
    case LayerKind::BatchNorm: return std::make_unique<BatchNormLayer>(spec, input_shape);
    case LayerKind::Dropout: return std::make_unique<DropoutLayer>(spec, input_shape);
    case LayerKind::ReLU:
    case LayerKind::LeakyReLU:
    case LayerKind::Softmax: return std::make_unique<ActivationLayer>(spec, input_shape);
  }
  fail(ErrorKind::Config, "unknown layer kind");
}

Tensor he_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
  require(fan_in >= 1, ErrorKind::Config, "he_init: fan_in must be at least 1");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(shape);
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(normal(rng)));
  return t;
}

Tensor dense_backward_pre_activation(Layer& dense, const Tensor& grad_logits) {
  auto* d = dynamic_cast<DenseLayer*>(&dense);
  require(d != nullptr, ErrorKind::State, "logit backward requested on a non-dense layer");
  return d->backward_linear(grad_logits);
}

const Tensor& dense_logits(const Layer& dense) {
  const auto* d = dynamic_cast<const DenseLayer*>(&dense);
  require(d != nullptr, ErrorKind::State, "logits requested from a non-dense layer");
  return d->logits();
}

}  // namespace deepbeat::nn
