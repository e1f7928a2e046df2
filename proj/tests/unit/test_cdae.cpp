#include <doctest.h>

#include "deepbeat/cdae.hpp"
#include "deepbeat/dsp.hpp"
#include "deepbeat/error.hpp"
#include "deepbeat/nn/sequential.hpp"
#include "fixtures.hpp"

using namespace deepbeat;
using namespace deepbeat::cdae;

TEST_CASE("paper-profile autoencoder: shapes and parameter counts") {
  const auto rows = nn::describe({kWindowLength, 1}, [] {
    auto s = encoder_specs(Profile::Paper);
    const auto d = decoder_specs(Profile::Paper);
    s.insert(s.end(), d.begin(), d.end());
    return s;
  }());
  const std::vector<std::size_t> params{704, 0, 23085, 0, 11300, 0, 12550, 0, 18045, 0, 28864, 0, 0, 40551200};
  const std::vector<nn::Shape> shapes{{800, 64}, {266, 64}, {266, 45}, {88, 45}, {88, 50}, {44, 50}, {44, 50},
                                      {88, 50},  {88, 45},  {264, 45}, {264, 64}, {792, 64}, {50688}, {800}};
  REQUIRE(rows.size() == params.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    CHECK(rows[i].params == params[i]);
    CHECK(rows[i].output == shapes[i]);
    total += rows[i].params;
  }
  CHECK(total == 40645748);
}

TEST_CASE("built paper-profile autoencoder allocates exactly the tabulated parameters") {
  CdaeModel m = build_cdae(Profile::Paper, 1);
  CHECK(m.net.parameter_count() == 40645748);
  CHECK(m.net.layer(kEncoderLayers - 1).output_shape() == nn::Shape{44, 50});
}

TEST_CASE("mini profile keeps the topology with quartered widths") {
  CHECK(scaled_width(Profile::Mini, 64) == 16);
  CHECK(scaled_width(Profile::Mini, 45) == 11);
  CHECK(scaled_width(Profile::Paper, 45) == 45);
  CdaeModel m = build_cdae(Profile::Mini, 1);
  CHECK(m.net.size() == 14);
  CHECK(m.net.output_shape() == nn::Shape{800});
  CHECK(m.net.layer(kEncoderLayers - 1).output_shape() == nn::Shape{44, scaled_width(Profile::Mini, 50)});
}

TEST_CASE("encode: shape, determinism, distinct latents, shape errors") {
  CdaeModel m = build_cdae(Profile::Mini, 2);
  const auto b = testutil::small_bundle(4, 0, 0);
  const auto x = harness::gather_windows(b, {0, 1});
  const nn::Tensor z = encode(m, x, 2);
  CHECK(z.shape() == nn::Shape{2, 44, 13});
  CHECK(encode(m, x, 2) == z);
  bool differ = false;
  for (std::size_t i = 0; i < 44 * 13; ++i) differ |= z[i] != z[44 * 13 + i];
  CHECK(differ);
  CHECK_THROWS_AS(encode(m, std::vector<double>(799), 1), Error);
  CHECK(denoise(m, x, 2).shape() == nn::Shape{2, 800});
}

TEST_CASE("plateau schedule reduces after each run of non-improving epochs") {
  PlateauSchedule s(25, 0.1, 1e-6);
  double lr = 1e-3;
  std::vector<std::size_t> reductions;
  for (std::size_t epoch = 0; epoch < 80; ++epoch) {
    lr = s.observe(1.0, lr);
    if (s.reduced_last()) reductions.push_back(epoch + 1);
  }
  // epoch 1 sets the best loss; epochs 2..26 are the first non-improving run
  CHECK(reductions == std::vector<std::size_t>{26, 51, 76});
  CHECK(lr == doctest::Approx(1e-6));
  PlateauSchedule floor(1, 0.1, 1e-6);
  double small = 1e-6;
  floor.observe(1.0, small);
  CHECK(floor.observe(1.0, small) == 1e-6);
}

TEST_CASE("pretraining overfits a tiny set, retains the best epoch and is seed-deterministic") {
  const auto b = testutil::small_bundle(64, 16, 0);
  const PairSet train = harness::pair_set(b, Partition::Train), val = harness::pair_set(b, Partition::Val);
  PretrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 5;
  CdaeModel a = build_cdae(Profile::Mini, 5);
  pretrain(a, train, val, cfg);
  REQUIRE(a.history.size() == 30);
  CHECK(a.history.back().train_mse < a.history.front().train_mse);
  CHECK(a.trained);
  double best = 1e300;
  for (const auto& h : a.history) best = std::min(best, h.val_mse);
  const nn::Tensor rec = denoise(a, val.noisy, val.count);
  CHECK(mse({rec.values().begin(), rec.values().end()}, val.clean) == doctest::Approx(best).epsilon(1e-9));

  CdaeModel c = build_cdae(Profile::Mini, 5);
  pretrain(c, train, val, cfg);
  const auto pa = a.net.parameters(), pc = c.net.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pc[i]->value);

  CHECK_THROWS_AS(pretrain(c, PairSet{}, val, cfg), Error);
}
