#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "deepbeat/nn/layers.hpp"

namespace deepbeat::nn {

/// Linear stack of layers. Layer i reads the output shape of layer i-1.
class Sequential {
 public:
  /// salt_base offsets dropout salts so stacks inside one model draw
  /// independent masks.
  explicit Sequential(Shape input_shape, std::uint64_t salt_base = 0);

  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(const LayerSpec& spec);

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  std::vector<LayerSpec> specs() const;

  Tensor forward(const Tensor& x, const RunContext& ctx) { return forward(x, ctx, 0, size()); }
  /// Runs layers [begin, end).
  Tensor forward(const Tensor& x, const RunContext& ctx, std::size_t begin, std::size_t end);

  Tensor backward(const Tensor& grad) { return backward(grad, 0, size()); }
  /// Back-propagates through layers [begin, end) in reverse. Throws Numeric
  /// naming the layer when a non-finite gradient appears.
  Tensor backward(const Tensor& grad, std::size_t begin, std::size_t end);

  /// Backward when the last layer is a Dense whose fused activation has
  /// already been folded into grad_logits (softmax + cross-entropy).
  Tensor backward_from_logits(const Tensor& grad_logits);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void initialize(Rng& rng);
  void zero_grad();

 private:
  Shape input_shape_;
  std::uint64_t salt_base_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// One row of a layer table: output shape and parameter count per layer.
struct LayerRow {
  LayerKind kind = LayerKind::Flatten;
  Shape output;
  std::size_t params = 0;
};

/// Shapes and counts computed from the specs alone; no weights are allocated.
std::vector<LayerRow> describe(const Shape& input, const std::vector<LayerSpec>& specs);

/// Copies of every parameter value, in declaration order.
std::vector<Tensor> snapshot(const std::vector<Parameter*>& params);
void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values);

}  // namespace deepbeat::nn
