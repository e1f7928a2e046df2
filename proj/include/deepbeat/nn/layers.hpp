#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepbeat/nn/tensor.hpp"
#include "deepbeat/random.hpp"

namespace deepbeat::nn {

enum class LayerKind {
  Conv1D,
  MaxPool1D,
  UpSample1D,
  Dense,
  Flatten,
  BatchNorm,
  Dropout,
  ReLU,
  LeakyReLU,
  Softmax,
};

enum class Padding { Same, Valid };

/// Activation fused into Conv1D / Dense outputs.
enum class Activation { Linear, ReLU, LeakyReLU, Softmax };

enum class Mode { Train, Infer };

std::string_view to_string(LayerKind k);
std::string_view to_string(Padding p);
std::string_view to_string(Activation a);
std::optional<LayerKind> parse_layer_kind(std::string_view s);
std::optional<Padding> parse_padding(std::string_view s);
std::optional<Activation> parse_activation(std::string_view s);

/// Display name used in layer tables ("Conv1D", "MaxPooling", ...).
std::string_view display_name(LayerKind k);

struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  std::size_t filters = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  Padding padding = Padding::Same;
  std::size_t pool = 0;
  std::size_t factor = 0;
  std::size_t units = 0;
  Activation activation = Activation::Linear;
  double rate = 0.0;
  double slope = 0.01;
  double momentum = 0.99;
  double epsilon = 1e-5;

  static LayerSpec conv1d(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                          Padding padding = Padding::Same, Activation act = Activation::Linear);
  static LayerSpec max_pool(std::size_t pool);
  static LayerSpec upsample(std::size_t factor);
  static LayerSpec dense(std::size_t units, Activation act = Activation::Linear);
  static LayerSpec flatten();
  static LayerSpec batch_norm(double momentum = 0.99, double epsilon = 1e-5);
  static LayerSpec dropout(double rate);
  static LayerSpec relu();
  static LayerSpec leaky_relu(double slope);
  static LayerSpec softmax();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-sample output shape; throws Shape/Config on inconsistent hyperparameters.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input);

/// Parameter count of a layer without materializing it.
std::size_t parameter_count(const LayerSpec& spec, const Shape& input);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

struct RunContext {
  Mode mode = Mode::Infer;
  std::uint64_t dropout_seed = 0;
};

/// A layer operating on batches: inputs are [B, ...input_shape()].
/// forward() caches what backward() needs; backward() accumulates parameter
/// gradients and returns the gradient with respect to the input.
class Layer {
 public:
  Layer(LayerSpec spec, Shape input_shape);
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const LayerSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  virtual Tensor forward(const Tensor& x, const RunContext& ctx) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  virtual void initialize(Rng&) {}

  /// Distinguishes dropout streams of different layers within one model.
  void set_salt(std::uint64_t salt) { salt_ = salt; }
  std::uint64_t salt() const { return salt_; }

 protected:
  std::size_t check_batch(const Tensor& x) const;

  LayerSpec spec_;
  Shape input_shape_;
  Shape output_shape_;
  std::uint64_t salt_ = 0;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape);

/// He-normal draws, N(0, sqrt(2 / fan_in)), rounded to float precision.
Tensor he_init(const Shape& shape, std::size_t fan_in, Rng& rng);

/// Dense layers expose a logit-level backward for attribution.
Tensor dense_backward_pre_activation(Layer& dense, const Tensor& grad_logits);
/// Cached pre-activation output of the last forward pass of a Dense layer.
const Tensor& dense_logits(const Layer& dense);

}  // namespace deepbeat::nn
