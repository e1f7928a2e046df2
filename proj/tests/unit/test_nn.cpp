#include <doctest.h>

#include <cmath>
#include <random>

#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/error.hpp"
#include "deepbeat/nn/adam.hpp"
#include "deepbeat/nn/loss.hpp"
#include "gradcheck.hpp"

using namespace deepbeat;
using namespace deepbeat::nn;
using testutil::check_sequential;
using testutil::random_tensor;

namespace {

constexpr double kTol = 1e-4;
constexpr int kSeeds = 20;

RunContext train_ctx(std::uint64_t seed) { return {Mode::Train, seed}; }

void check_stack(const Shape& in, const std::vector<LayerSpec>& specs, std::size_t batch, const RunContext& ctx,
                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Sequential net(in);
  for (const auto& s : specs) net.add(s);
  Rng init(seed);
  net.initialize(init);
  // Biases and batch-norm affine terms start at constants; perturb them so
  // their gradients are exercised away from the trivial point.
  for (auto* p : net.parameters())
    if (p->trainable)
      for (auto& v : p->value.values()) v += std::normal_distribution<double>(0.0, 0.1)(rng);
  Shape xs{batch};
  xs.insert(xs.end(), in.begin(), in.end());
  const auto rep = check_sequential(net, random_tensor(xs, rng), ctx, rng);
  CHECK(rep.input < kTol);
  CHECK(rep.params < kTol);
}

}  // namespace

TEST_CASE("shape inference follows same and valid padding") {
  CHECK(infer_output_shape(LayerSpec::conv1d(64, 10), {800, 1}) == Shape{800, 64});
  CHECK(infer_output_shape(LayerSpec::conv1d(64, 4, 3), {44, 50}) == Shape{15, 64});
  CHECK(infer_output_shape(LayerSpec::conv1d(25, 2, 2, Padding::Valid), {2, 35}) == Shape{1, 25});
  CHECK(infer_output_shape(LayerSpec::max_pool(3), {800, 64}) == Shape{266, 64});
  CHECK(infer_output_shape(LayerSpec::upsample(3), {264, 45}) == Shape{792, 45});
  CHECK(infer_output_shape(LayerSpec::flatten(), {3, 25}) == Shape{75});
  CHECK(infer_output_shape(LayerSpec::dense(175), {35}) == Shape{175});
  CHECK_THROWS_AS(infer_output_shape(LayerSpec::conv1d(4, 5, 1, Padding::Valid), {3, 2}), Error);
  CHECK_THROWS_AS(infer_output_shape(LayerSpec::dense(4), {3, 2}), Error);
}

TEST_CASE("parameter counts") {
  CHECK(parameter_count(LayerSpec::conv1d(64, 10), {800, 1}) == 704);
  CHECK(parameter_count(LayerSpec::conv1d(45, 8), {266, 64}) == 23085);
  CHECK(parameter_count(LayerSpec::dense(800), {50688}) == 40551200);
  CHECK(parameter_count(LayerSpec::batch_norm(), {44, 50}) == 200);
  CHECK(parameter_count(LayerSpec::max_pool(2), {88, 50}) == 0);
}

TEST_CASE("conv1d matches a direct convolution") {
  std::mt19937_64 rng(3);
  const Shape in{7, 3};
  Sequential net(in);
  net.add(LayerSpec::conv1d(2, 3, 2));  // same padding, stride 2: Lout 4, pad_left 1
  Rng init(1);
  net.initialize(init);
  auto params = net.parameters();
  const Tensor& W = params[0]->value;  // [k, cin, cout]
  const Tensor& b = params[1]->value;
  const Tensor x = random_tensor({1, 7, 3}, rng);
  const Tensor y = net.forward(x, {});
  REQUIRE(y.shape() == Shape{1, 4, 2});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t o = 0; o < 2; ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < 3; ++j) {
        const long pos = static_cast<long>(t * 2 + j) - 1;
        if (pos < 0 || pos >= 7) continue;
        for (std::size_t c = 0; c < 3; ++c) s += W[(j * 3 + c) * 2 + o] * x[static_cast<std::size_t>(pos) * 3 + c];
      }
      CHECK(y[t * 2 + o] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("max pool takes the first maximum and drops the remainder") {
  Sequential net({5, 1});
  net.add(LayerSpec::max_pool(2));
  const Tensor y = net.forward(Tensor({1, 5, 1}, {1, 3, 3, 2, 9}), {});
  CHECK(y == Tensor({1, 2, 1}, {3, 3}));
  const Tensor g = net.backward(Tensor({1, 2, 1}, {1, 1}));
  CHECK(g == Tensor({1, 5, 1}, {0, 1, 1, 0, 0}));
}

TEST_CASE("gradient check: every layer kind over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    CAPTURE(seed);
    const auto ctx = train_ctx(seed);
    SUBCASE("conv1d same/valid, strided, activations") {
      check_stack({9, 3}, {LayerSpec::conv1d(4, 3, 1, Padding::Same, Activation::Linear)}, 2, ctx, seed);
      check_stack({10, 2}, {LayerSpec::conv1d(3, 4, 3, Padding::Same, Activation::Linear)}, 2, ctx, seed);
      check_stack({6, 2}, {LayerSpec::conv1d(3, 2, 2, Padding::Valid, Activation::ReLU)}, 3, ctx, seed);
      check_stack({8, 2}, {LayerSpec::conv1d(3, 5, 1, Padding::Same, Activation::LeakyReLU)}, 2, ctx, seed);
    }
    SUBCASE("dense with every activation") {
      check_stack({5}, {LayerSpec::dense(4, Activation::Linear)}, 3, ctx, seed);
      check_stack({5}, {LayerSpec::dense(4, Activation::ReLU)}, 3, ctx, seed);
      check_stack({5}, {LayerSpec::dense(4, Activation::LeakyReLU)}, 3, ctx, seed);
      check_stack({5}, {LayerSpec::dense(3, Activation::Softmax)}, 3, ctx, seed);
    }
    SUBCASE("pooling, upsampling, flatten") {
      check_stack({9, 2}, {LayerSpec::max_pool(3)}, 2, ctx, seed);
      check_stack({4, 2}, {LayerSpec::upsample(3)}, 2, ctx, seed);
      check_stack({4, 3}, {LayerSpec::flatten(), LayerSpec::dense(2)}, 2, ctx, seed);
    }
    SUBCASE("batch norm in training and inference mode") {
      check_stack({5, 3}, {LayerSpec::batch_norm()}, 4, ctx, seed);
      check_stack({5, 3}, {LayerSpec::batch_norm()}, 4, RunContext{}, seed);
    }
    SUBCASE("dropout with a fixed mask") {
      check_stack({6, 3}, {LayerSpec::dropout(0.3)}, 2, ctx, seed);
    }
    SUBCASE("standalone activations") {
      check_stack({7}, {LayerSpec::relu()}, 2, ctx, seed);
      check_stack({7}, {LayerSpec::leaky_relu(0.01)}, 2, ctx, seed);
      check_stack({4}, {LayerSpec::softmax()}, 3, ctx, seed);
    }
  }
}

TEST_CASE("gradient check: shared block and rhythm branch of the mini network") {
  const auto specs = net::deepbeat_specs(cdae::Profile::Mini);
  std::vector<LayerSpec> stack = specs.shared;
  stack.insert(stack.end(), specs.rhythm.begin(), specs.rhythm.end());
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CAPTURE(seed);
    check_stack({44, 13}, stack, 4, train_ctx(seed), seed);
  }
}

TEST_CASE("losses") {
  const Tensor p({2, 2}, {0.25, 0.75, 1.0, 0.0});
  const Tensor y({2, 2}, {0, 1, 0, 1});
  const auto ce = cross_entropy_loss(p, y);
  CHECK(ce.value == doctest::Approx((-std::log(0.75) - std::log(kProbClip)) / 2).epsilon(1e-12));
  const auto m = mse_loss(Tensor({2}, {1, 2}), Tensor({2}, {0, 0}));
  CHECK(m.value == doctest::Approx(2.5));
  CHECK(m.grad == Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(mse_loss(Tensor({2}), Tensor({3})), Error);

  // logit gradient agrees with finite differences of CE(softmax(z))
  std::mt19937_64 rng(9);
  Tensor z = random_tensor({3, 4}, rng);
  Tensor target({3, 4});
  for (std::size_t i = 0; i < 3; ++i) target[i * 4 + i] = 1;
  const auto softmax = [](const Tensor& zz) {
    Tensor out(zz.shape());
    for (std::size_t i = 0; i < zz.dim(0); ++i) {
      double mx = -1e300, s = 0;
      for (std::size_t k = 0; k < 4; ++k) mx = std::max(mx, zz[i * 4 + k]);
      for (std::size_t k = 0; k < 4; ++k) s += std::exp(zz[i * 4 + k] - mx);
      for (std::size_t k = 0; k < 4; ++k) out[i * 4 + k] = std::exp(zz[i * 4 + k] - mx) / s;
    }
    return out;
  };
  const Tensor g = softmax_ce_logit_grad(softmax(z), target);
  const auto num = testutil::numeric_grad(z.values(), [&] { return cross_entropy_loss(softmax(z), target).value; });
  CHECK(testutil::rel_error({g.values().begin(), g.values().end()}, num) < 1e-6);
}

TEST_CASE("adam first step moves each weight by about lr against its gradient") {
  Parameter p{"w", Tensor({3}, {1.0, -2.0, 0.5}), Tensor({3}, {0.3, -4.0, 1e-3}), true};
  Parameter frozen{"m", Tensor({1}, {7.0}), Tensor({1}, {1.0}), false};
  Adam adam({}, false);
  adam.step({&p, &frozen});
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-9));
  CHECK(p.value[2] == doctest::Approx(0.5 - 1e-3 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-9));
  CHECK(frozen.value[0] == 7.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam rounds weights to float precision by default") {
  Parameter p{"w", Tensor({1}, {0.1}), Tensor({1}, {0.7}), true};
  Adam adam;
  adam.step({&p});
  CHECK(p.value[0] == static_cast<double>(static_cast<float>(p.value[0])));
}

TEST_CASE("non-finite gradients are reported with the layer name") {
  Sequential net({3});
  net.add(LayerSpec::dense(2));
  Rng init(1);
  net.initialize(init);
  net.forward(Tensor({1, 3}, {1, 2, 3}), {});
  CHECK_THROWS_AS(net.backward(Tensor({1, 2}, {std::nan(""), 0})), Error);
}

TEST_CASE("dropout is the identity at inference and scales kept units in training") {
  Sequential net({1000});
  net.add(LayerSpec::dropout(0.2));
  const Tensor x({1, 1000}, 1.0);
  CHECK(net.forward(x, {}) == x);
  const Tensor y = net.forward(x, {Mode::Train, 5});
  std::size_t kept = 0;
  for (double v : y.values()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.25)));
    kept += v != 0.0;
  }
  CHECK(kept > 750);
  CHECK(kept < 850);
  CHECK(net.forward(x, {Mode::Train, 5}) == y);
}

TEST_CASE("bias gradients do not depend on where the layer's buffers live") {
  std::mt19937_64 rng(9);
  for (const auto& spec : {LayerSpec::conv1d(13, 3), LayerSpec::dense(13)}) {
    const Shape in = spec.kind == LayerKind::Dense ? Shape{40} : Shape{40, 5};
    Shape xs{24};
    xs.insert(xs.end(), in.begin(), in.end());
    const Tensor x = random_tensor(xs, rng);
    Shape ys{24};
    const Shape out = infer_output_shape(spec, in);
    ys.insert(ys.end(), out.begin(), out.end());
    const Tensor g = random_tensor(ys, rng);
    std::vector<double> first;
    std::vector<std::vector<double>> pad;
    for (std::size_t shift = 0; shift < 16; ++shift) {
      pad.emplace_back(shift + 1);  // moves the layer's allocations around the heap
      Sequential net(in);
      net.add(spec);
      Rng init(2);
      net.initialize(init);
      net.forward(x, train_ctx(1));
      net.backward(g);
      const auto db = net.parameters()[1]->grad.values();
      if (first.empty()) first.assign(db.begin(), db.end());
      CHECK(std::vector<double>(db.begin(), db.end()) == first);
    }
  }
}
