#include <doctest.h>

#include <cmath>

#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/error.hpp"
#include "deepbeat/nn/loss.hpp"
#include "fixtures.hpp"

using namespace deepbeat;
using namespace deepbeat::net;

namespace {

std::vector<nn::LayerRow> section_rows(const nn::Shape& in, const std::vector<nn::LayerSpec>& specs) {
  return nn::describe(in, specs);
}

}  // namespace

TEST_CASE("paper-profile network: shapes and parameter counts of every section") {
  const auto s = deepbeat_specs(Profile::Paper);
  const auto enc = section_rows({800, 1}, s.encoder);
  CHECK(enc.back().output == nn::Shape{44, 50});
  const auto shared = section_rows({44, 50}, s.shared);
  CHECK(shared.back().output == nn::Shape{5, 64});
  std::vector<std::size_t> shared_params;
  for (const auto& r : shared)
    if (r.params) shared_params.push_back(r.params);
  CHECK(shared_params == std::vector<std::size_t>{200, 12864, 256, 8995, 140, 9024, 256});

  const auto rhythm = section_rows({5, 64}, s.rhythm);
  std::vector<std::size_t> rp;
  for (const auto& r : rhythm)
    if (r.params) rp.push_back(r.params);
  // 1775 is the k=2 valid conv standing in for the 525-parameter reference row
  CHECK(rp == std::vector<std::size_t>{11235, 140, 1775, 100, 2660, 140, 6300, 352});
  CHECK(rhythm.back().output == nn::Shape{2});

  const auto qa = section_rows({5, 64}, s.qa);
  std::vector<std::size_t> qp;
  for (const auto& r : qa)
    if (r.params) qp.push_back(r.params);
  CHECK(qp == std::vector<std::size_t>{6425, 100, 13300, 528});
  CHECK(qa.back().output == nn::Shape{3});
}

TEST_CASE("transfer copies the encoder exactly and keeps it trainable") {
  cdae::CdaeModel c = cdae::build_cdae(Profile::Mini, 3);
  DeepBeatModel m = build_deepbeat(Profile::Mini, 4, &c);
  CHECK(m.pretrained);
  const auto src = c.net.parameters();
  const auto dst = m.encoder.parameters();
  REQUIRE(dst.size() == 6);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    CHECK(dst[i]->value == src[i]->value);
    CHECK(dst[i]->trainable);
  }
  const auto b = testutil::small_bundle(6, 0, 0);
  const auto x = harness::gather_windows(b, {0, 1, 2});
  const nn::Tensor a = cdae::encode(c, x, 3);
  const nn::Tensor e = cdae::forward_windows(m.encoder, x, 3, m.encoder.size());
  REQUIRE(a.shape() == e.shape());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - e[i]) <= 1e-6);

  // a second copy is a no-op
  const auto before = nn::snapshot(m.encoder.parameters());
  transfer_encoder(c, m);
  CHECK(nn::snapshot(m.encoder.parameters()) == before);

  // fine-tuning moves the transferred weights
  TrainConfig cfg;
  cfg.epochs = 1;
  train_deepbeat(m, harness::labeled_set(b, Partition::Train), {}, cfg);
  CHECK(nn::snapshot(m.encoder.parameters()) != before);

  cdae::CdaeModel wide = cdae::build_cdae(Profile::Paper, 1);
  CHECK_THROWS_AS(transfer_encoder(wide, m), Error);
}

TEST_CASE("inference: valid probabilities, determinism, shape errors") {
  DeepBeatModel m = build_deepbeat(Profile::Mini, 1);
  const auto b = testutil::small_bundle(8, 0, 0);
  const auto preds = infer(m, harness::gather_windows(b, {0, 1, 2, 3}), 4);
  for (const auto& p : preds) {
    CHECK(p.rhythm_probs[0] + p.rhythm_probs[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.qa_probs[0] + p.qa_probs[1] + p.qa_probs[2] == doctest::Approx(1.0).epsilon(1e-6));
    for (double v : p.rhythm_probs) CHECK(v >= 0);
  }
  const auto again = infer(m, harness::gather_windows(b, {0, 1, 2, 3}), 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again[i].rhythm_probs == preds[i].rhythm_probs);
  Window w;
  w.samples.assign(700, 0.5);
  CHECK_THROWS_AS(infer(m, w), Error);
}

TEST_CASE("gradients reach the shared block from each head alone") {
  DeepBeatModel m = build_deepbeat(Profile::Mini, 2);
  const auto b = testutil::small_bundle(8, 0, 0);
  const auto set = harness::labeled_set(b, Partition::Train);
  nn::Tensor x({set.count, 800, 1}, set.x);
  nn::Tensor yq({set.count, 3});
  nn::Tensor yr({set.count, 2});
  for (std::size_t i = 0; i < set.count; ++i) {
    yq[i * 3 + static_cast<std::size_t>(set.qa[i])] = 1;
    yr[i * 2 + static_cast<std::size_t>(set.rhythm[i])] = 1;
  }
  const nn::RunContext ctx{nn::Mode::Train, 1};
  const auto shared_grad_norm = [&] {
    double s = 0;
    for (auto* p : m.shared.parameters())
      for (double g : p->grad.values()) s += g * g;
    return s;
  };
  for (int head = 0; head < 2; ++head) {
    for (auto* p : m.parameters()) p->grad.fill(0);
    const nn::Tensor h = forward_trunk(m, x, ctx);
    nn::Sequential& branch = head == 0 ? m.rhythm : m.qa;
    const nn::Tensor p = branch.forward(h, ctx);
    m.shared.backward(branch.backward_from_logits(nn::softmax_ce_logit_grad(p, head == 0 ? yr : yq)));
    CHECK(shared_grad_norm() > 0);
  }
}

TEST_CASE("lambda_qa = 0 leaves the quality head untouched") {
  DeepBeatModel m = build_deepbeat(Profile::Mini, 6);
  const auto before = nn::snapshot(m.qa.parameters());
  const auto b = testutil::small_bundle(16, 0, 0);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.lambda_qa = 0;
  train_deepbeat(m, harness::labeled_set(b, Partition::Train), {}, cfg);
  const auto after = nn::snapshot(m.qa.parameters());
  const auto qa = m.qa.parameters();
  for (std::size_t i = 0; i < before.size(); ++i)
    if (qa[i]->trainable) CHECK(after[i] == before[i]);
  for (const auto& h : m.history) CHECK(h.train_qa == 0.0);
}

TEST_CASE("training overfits 16 windows") {
  DeepBeatModel m = build_deepbeat(Profile::Paper, 7);
  const auto b = testutil::small_bundle(16, 0, 0, 9);
  const auto set = harness::labeled_set(b, Partition::Train);
  REQUIRE(set.count == 16);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.seed = 7;
  train_deepbeat(m, set, {}, cfg);
  double best = 1e300;
  for (const auto& h : m.history) best = std::min(best, h.train_total);
  CHECK(best < 0.05);
}

TEST_CASE("training validates its inputs") {
  DeepBeatModel m = build_deepbeat(Profile::Mini, 1);
  CHECK_THROWS_AS(train_deepbeat(m, {}, {}, {}), Error);
  LabeledSet bad;
  bad.count = 1;
  bad.x.assign(800, 0.5);
  bad.rhythm = {1};
  bad.qa = {};
  CHECK_THROWS_AS(train_deepbeat(m, bad, {}, {}), Error);
  bad.qa = {4};
  CHECK_THROWS_AS(train_deepbeat(m, bad, {}, {}), Error);
}
