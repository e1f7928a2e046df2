#include "deepbeat/nn/sequential.hpp"

#include "deepbeat/error.hpp"

namespace deepbeat::nn {

Sequential::Sequential(Shape input_shape, std::uint64_t salt_base)
    : input_shape_(std::move(input_shape)), salt_base_(salt_base) {}

void Sequential::add(const LayerSpec& spec) {
  auto layer = make_layer(spec, layers_.empty() ? input_shape_ : layers_.back()->output_shape());
  layer->set_salt(salt_base_ + layers_.size());
  layers_.push_back(std::move(layer));
}

const Shape& Sequential::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back()->output_shape();
}

std::vector<LayerSpec> Sequential::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

Tensor Sequential::forward(const Tensor& x, const RunContext& ctx, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= size(), ErrorKind::State, "forward: layer range out of bounds");
  Tensor h = x;
  for (std::size_t i = begin; i < end; ++i) h = layers_[i]->forward(h, ctx);
  return h;
}

Tensor Sequential::backward(const Tensor& grad, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= size(), ErrorKind::State, "backward: layer range out of bounds");
  Tensor g = grad;
  for (std::size_t i = end; i-- > begin;) {
    g = layers_[i]->backward(g);
    if (!g.all_finite())
      fail(ErrorKind::Numeric, "non-finite gradient at layer " + std::to_string(i) + " (" +
                                   std::string(to_string(layers_[i]->spec().kind)) + ")");
  }
  return g;
}

Tensor Sequential::backward_from_logits(const Tensor& grad_logits) {
  require(!layers_.empty() && layers_.back()->spec().kind == LayerKind::Dense, ErrorKind::State,
          "backward_from_logits: last layer must be dense");
  Tensor g = dense_backward_pre_activation(*layers_.back(), grad_logits);
  return backward(g, 0, size() - 1);
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (Parameter* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Sequential::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_)
    for (const Parameter* p : std::as_const(*l).parameters()) out.push_back(p);
  return out;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->parameter_count();
  return n;
}

void Sequential::initialize(Rng& rng) {
  for (auto& l : layers_) l->initialize(rng);
}

void Sequential::zero_grad() {
  for (Parameter* p : parameters()) p->grad.fill(0.0);
}

std::vector<LayerRow> describe(const Shape& input, const std::vector<LayerSpec>& specs) {
  std::vector<LayerRow> rows;
  Shape shape = input;
  for (const LayerSpec& spec : specs) {
    LayerRow row{spec.kind, infer_output_shape(spec, shape), parameter_count(spec, shape)};
    shape = row.output;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values) {
  require(params.size() == values.size(), ErrorKind::State, "restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->value.shape() == values[i].shape(), ErrorKind::Shape, "restore: shape mismatch");
    params[i]->value = values[i];
  }
}

}  // namespace deepbeat::nn
