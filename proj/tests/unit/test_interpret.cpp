#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/error.hpp"
#include "deepbeat/interpret.hpp"
#include "fixtures.hpp"

using namespace deepbeat;
using namespace deepbeat::interpret;

namespace {

struct Trained {
  harness::DatasetBundle bundle = testutil::small_bundle(48, 0, 8, 5);
  net::DeepBeatModel model = net::build_deepbeat(cdae::Profile::Mini, 3);
  Trained() {
    net::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    net::train_deepbeat(model, harness::labeled_set(bundle, Partition::Train), {}, cfg);
  }
  Window window(std::size_t i) const {
    Window w;
    w.samples = bundle.window(i);
    w.source_id = bundle.labels[i].window_id;
    return w;
  }
};

void check_map(const SaliencyMap& m) {
  REQUIRE(m.scores.size() == 800);
  const double mx = *std::max_element(m.scores.begin(), m.scores.end());
  for (double v : m.scores) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
  CHECK((mx == 1.0 || mx == 0.0));
}

}  // namespace

TEST_CASE("saliency requires a trained model") {
  net::DeepBeatModel m = net::build_deepbeat(cdae::Profile::Mini, 1);
  Window w;
  w.samples.assign(800, 0.5);
  CHECK_THROWS_AS(saliency(m, w, Rhythm::AF), Error);
}

TEST_CASE("saliency maps: range, determinism, class contrast, layers") {
  Trained t;
  const Window w = t.window(0);
  for (auto layer : {SaliencyLayer::Rhythm, SaliencyLayer::Shared, SaliencyLayer::Encoder}) {
    CAPTURE(to_string(layer));
    const SaliencyMap af = saliency(t.model, w, Rhythm::AF, layer);
    const SaliencyMap sinus = saliency(t.model, w, Rhythm::Sinus, layer);
    check_map(af);
    check_map(sinus);
    CHECK(saliency(t.model, w, Rhythm::AF, layer).scores == af.scores);
    double linf = 0;
    for (std::size_t i = 0; i < 800; ++i) linf = std::max(linf, std::abs(af.scores[i] - sinus.scores[i]));
    CHECK(linf > 0);
    CHECK(af.window_id == w.source_id);
  }
  CHECK(saliency(t.model, w, Rhythm::AF, SaliencyLayer::Rhythm).source_length == 1);
  CHECK(saliency(t.model, w, Rhythm::AF, SaliencyLayer::Shared).source_length == 5);
  CHECK(saliency(t.model, w, Rhythm::AF, SaliencyLayer::Encoder).source_length == 88);
}

TEST_CASE("zeroed rhythm-head weights give an all-zero map") {
  Trained t;
  auto& head = t.model.rhythm.layer(t.model.rhythm.size() - 1);
  for (auto* p : head.parameters()) p->value.fill(0);
  const SaliencyMap m = saliency(t.model, t.window(1), Rhythm::AF);
  for (double v : m.scores) CHECK(v == 0);
}

TEST_CASE("linear upsampling with centred samples") {
  CHECK(upsample_linear({2.0}, 5) == std::vector<double>(5, 2.0));
  const auto y = upsample_linear({0.0, 1.0}, 4);
  // source centres at output positions 0.5 and 2.5
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(0.25));
  CHECK(y[2] == doctest::Approx(0.75));
  CHECK(y[3] == doctest::Approx(1.0));
}

TEST_CASE("embeddings: shape, identical rows for identical windows, pure read") {
  Trained t;
  std::vector<double> x = harness::gather_windows(t.bundle, {0, 1});
  const auto first = t.bundle.window(0);
  x.insert(x.end(), first.begin(), first.end());
  const auto before = net::infer(t.model, x, 3);
  const nn::Tensor e = export_embeddings(t.model, x, 3);
  const std::size_t units = cdae::scaled_width(cdae::Profile::Mini, 175);
  CHECK(e.shape() == nn::Shape{3, units});
  // equal up to GEMM blocking at a different batch row
  for (std::size_t k = 0; k < units; ++k) CHECK(e[k] == doctest::Approx(e[2 * units + k]).epsilon(1e-12));
  const auto after = net::infer(t.model, x, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(after[i].rhythm_probs == before[i].rhythm_probs);
}
