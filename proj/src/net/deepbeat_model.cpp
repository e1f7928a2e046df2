#include "deepbeat/deepbeat_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "deepbeat/error.hpp"
#include "deepbeat/nn/adam.hpp"
#include "deepbeat/nn/loss.hpp"

namespace deepbeat::net {

using nn::Activation;
using nn::LayerSpec;
using nn::Padding;

DeepBeatSpecs deepbeat_specs(Profile p, double dropout, double slope) {
  const auto w = [p](std::size_t c) { return cdae::scaled_width(p, c); };
  const auto conv = [](std::size_t f, std::size_t k, std::size_t s, Padding pad, Activation a) {
    return LayerSpec::conv1d(f, k, s, pad, a);
  };
  DeepBeatSpecs d;
  d.encoder = cdae::encoder_specs(p);
  // Shared block: 44 -> 15 -> 5 -> 5 via k = 4 convs with strides 3, 3, 1.
  d.shared = {
      LayerSpec::batch_norm(),
      conv(w(64), 4, 3, Padding::Same, Activation::Linear), LayerSpec::leaky_relu(slope),
      LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
      conv(w(35), 4, 3, Padding::Same, Activation::Linear), LayerSpec::leaky_relu(slope),
      LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
      conv(w(64), 4, 1, Padding::Same, Activation::Linear), LayerSpec::leaky_relu(slope),
      LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
  };
  // Rhythm branch: 5 -> 2 -> 1 -> 1. The middle conv is k = 2 valid stride 2,
  // the only shape-consistent choice. Its parameter count (1775 in the paper
  // profile) cannot match the 525 of the reference listing.
  d.rhythm = {
      conv(w(35), 5, 3, Padding::Same, Activation::ReLU), LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
      conv(w(25), 2, 2, Padding::Valid, Activation::ReLU), LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
      conv(w(35), 3, 1, Padding::Same, Activation::ReLU), LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
      LayerSpec::flatten(),
      LayerSpec::dense(w(175), Activation::ReLU),
      LayerSpec::dense(kRhythmClasses, Activation::Softmax),
  };
  d.qa = {
      conv(w(25), 4, 2, Padding::Same, Activation::ReLU), LayerSpec::batch_norm(), LayerSpec::dropout(dropout),
      LayerSpec::flatten(),
      LayerSpec::dense(w(175), Activation::ReLU),
      LayerSpec::dense(kQualityClasses, Activation::Softmax),
  };
  return d;
}

std::vector<nn::Parameter*> DeepBeatModel::parameters() {
  std::vector<nn::Parameter*> out;
  for (nn::Sequential* s : {&encoder, &shared, &rhythm, &qa})
    for (nn::Parameter* p : s->parameters()) out.push_back(p);
  return out;
}

std::size_t DeepBeatModel::parameter_count() const {
  return encoder.parameter_count() + shared.parameter_count() + rhythm.parameter_count() + qa.parameter_count();
}

namespace {

nn::Sequential stack(const nn::Shape& in, const std::vector<LayerSpec>& specs, std::uint64_t salt) {
  nn::Sequential s(in, salt);
  for (const auto& spec : specs) s.add(spec);
  return s;
}

void check_head(const nn::Sequential& s, std::size_t classes, const char* name) {
  require(s.size() > 0 && s.layer(s.size() - 1).spec().kind == nn::LayerKind::Dense &&
              s.layer(s.size() - 1).spec().activation == Activation::Softmax &&
              s.output_shape() == nn::Shape{classes},
          ErrorKind::Shape, std::string("deepbeat: ") + name + " branch must end in a softmax dense layer");
}

}  // namespace

DeepBeatModel build_deepbeat(Profile profile, std::uint64_t seed, const DeepBeatSpecs& specs) {
  DeepBeatModel m;
  m.profile = profile;
  m.seed = seed;
  m.encoder = stack({kWindowLength, 1}, specs.encoder, 0);
  m.shared = stack(m.encoder.output_shape(), specs.shared, 100);
  m.rhythm = stack(m.shared.output_shape(), specs.rhythm, 200);
  m.qa = stack(m.shared.output_shape(), specs.qa, 300);
  require(m.encoder.size() == cdae::kEncoderLayers, ErrorKind::Shape, "deepbeat: encoder must have 6 layers");
  check_head(m.rhythm, kRhythmClasses, "rhythm");
  check_head(m.qa, kQualityClasses, "qa");
  std::uint64_t section = 0;
  for (nn::Sequential* s : {&m.encoder, &m.shared, &m.rhythm, &m.qa}) {
    Rng rng = make_rng(seed, {0xdb, section++});
    s->initialize(rng);
  }
  return m;
}

DeepBeatModel build_deepbeat(Profile profile, std::uint64_t seed, const cdae::CdaeModel* encoder_source) {
  DeepBeatModel m = build_deepbeat(profile, seed, deepbeat_specs(profile));
  if (encoder_source != nullptr) transfer_encoder(*encoder_source, m);
  return m;
}

void transfer_encoder(const cdae::CdaeModel& source, DeepBeatModel& target) {
  require(source.net.size() > cdae::kEncoderLayers, ErrorKind::Shape, "transfer: source has no encoder");
  for (std::size_t i = 0; i < cdae::kEncoderLayers; ++i) {
    const nn::Layer& from = source.net.layer(i);
    nn::Layer& to = target.encoder.layer(i);
    require(from.spec() == to.spec() && from.input_shape() == to.input_shape(), ErrorKind::Shape,
            "transfer: encoder layer " + std::to_string(i) + " differs between source and target");
    auto src = from.parameters();
    auto dst = to.parameters();
    for (std::size_t k = 0; k < src.size(); ++k) {
      require(src[k]->value.shape() == dst[k]->value.shape(), ErrorKind::Shape, "transfer: parameter shape mismatch");
      dst[k]->value = src[k]->value;
    }
  }
  target.pretrained = true;
}

nn::Tensor forward_trunk(DeepBeatModel& m, const nn::Tensor& x, const nn::RunContext& ctx) {
  return m.shared.forward(m.encoder.forward(x, ctx), ctx);
}

namespace {

constexpr std::size_t kInferChunk = 64;

void check_set(const LabeledSet& s, const char* name) {
  const std::string what = std::string("deepbeat: ") + name + " set";
  require(s.x.size() == s.count * kWindowLength, ErrorKind::Shape, what + " does not hold count x 800 samples");
  require(s.rhythm.size() == s.count && s.qa.size() == s.count, ErrorKind::Data,
          what + " is missing rhythm or quality labels");
  for (std::size_t i = 0; i < s.count; ++i) {
    require(s.rhythm[i] >= 0 && s.rhythm[i] < static_cast<int>(kRhythmClasses), ErrorKind::Data,
            what + ": window " + std::to_string(i) + " has no valid rhythm label");
    require(s.qa[i] >= 0 && s.qa[i] < static_cast<int>(kQualityClasses), ErrorKind::Data,
            what + ": window " + std::to_string(i) + " has no valid quality label");
  }
}

struct Batch {
  nn::Tensor x, yr, yq;
};

Batch gather(const LabeledSet& s, const std::vector<std::size_t>& idx, std::size_t b, std::size_t e) {
  const std::size_t n = e - b;
  Batch out{nn::Tensor({n, kWindowLength, 1}), nn::Tensor({n, kRhythmClasses}), nn::Tensor({n, kQualityClasses})};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = idx[b + i];
    std::copy_n(s.x.data() + k * kWindowLength, kWindowLength, out.x.data() + i * kWindowLength);
    out.yr[i * kRhythmClasses + static_cast<std::size_t>(s.rhythm[k])] = 1.0;
    out.yq[i * kQualityClasses + static_cast<std::size_t>(s.qa[k])] = 1.0;
  }
  return out;
}

std::size_t argmax_row(const nn::Tensor& p, std::size_t row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (p[row * k + c] > p[row * k + best]) best = c;
  return best;
}

void evaluate(DeepBeatModel& m, const LabeledSet& s, double lambda, EpochRecord& rec) {
  std::vector<std::size_t> idx(s.count);
  std::iota(idx.begin(), idx.end(), 0);
  const nn::RunContext ctx{nn::Mode::Infer, 0};
  double lr = 0, lq = 0, hit_r = 0, hit_q = 0;
  for (std::size_t b = 0; b < s.count; b += kInferChunk) {
    const std::size_t e = std::min(s.count, b + kInferChunk);
    Batch batch = gather(s, idx, b, e);
    nn::Tensor h = forward_trunk(m, batch.x, ctx);
    nn::Tensor pr = m.rhythm.forward(h, ctx);
    nn::Tensor pq = m.qa.forward(h, ctx);
    const auto n = static_cast<double>(e - b);
    lr += nn::cross_entropy_loss(pr, batch.yr).value * n;
    lq += nn::cross_entropy_loss(pq, batch.yq).value * n;
    for (std::size_t i = 0; i < e - b; ++i) {
      hit_r += argmax_row(pr, i, kRhythmClasses) == static_cast<std::size_t>(s.rhythm[b + i]) ? 1 : 0;
      hit_q += argmax_row(pq, i, kQualityClasses) == static_cast<std::size_t>(s.qa[b + i]) ? 1 : 0;
    }
  }
  const auto n = static_cast<double>(s.count);
  rec.val_rhythm = lr / n;
  rec.val_qa = lq / n;
  rec.val_total = rec.val_rhythm + lambda * rec.val_qa;
  rec.val_rhythm_acc = hit_r / n;
  rec.val_qa_acc = hit_q / n;
}

}  // namespace

void train_deepbeat(DeepBeatModel& m, const LabeledSet& train, const LabeledSet& val, const TrainConfig& cfg) {
  require(train.count > 0, ErrorKind::Config, "deepbeat training needs a non-empty training set");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1, ErrorKind::Config, "deepbeat: epochs and batch size must be positive");
  require(cfg.lambda_qa >= 0.0 && std::isfinite(cfg.lambda_qa), ErrorKind::Config, "deepbeat: lambda_qa must be >= 0");
  check_set(train, "training");
  check_set(val, "validation");

  m.lambda_qa = cfg.lambda_qa;
  const bool multitask = cfg.lambda_qa > 0.0;
  nn::Adam adam(nn::AdamConfig{cfg.lr});
  auto params = m.parameters();
  std::vector<nn::Tensor> best = nn::snapshot(params);
  double best_loss = std::numeric_limits<double>::infinity();
  m.history.clear();

  std::vector<std::size_t> order(train.count);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cfg.seed, {0xdb, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0, bi = 0; b < train.count; b += cfg.batch_size, ++bi) {
      const std::size_t e = std::min(train.count, b + cfg.batch_size);
      Batch batch = gather(train, order, b, e);
      const nn::RunContext ctx{nn::Mode::Train, derive_seed(cfg.seed, {0xd1, epoch, bi})};
      for (nn::Parameter* p : params) p->grad.fill(0.0);

      nn::Tensor h = forward_trunk(m, batch.x, ctx);
      nn::Tensor pr = m.rhythm.forward(h, ctx);
      const double loss_r = nn::cross_entropy_loss(pr, batch.yr).value;
      nn::Tensor dh = m.rhythm.backward_from_logits(nn::softmax_ce_logit_grad(pr, batch.yr));
      double loss_q = 0.0;
      if (multitask) {
        nn::Tensor pq = m.qa.forward(h, ctx);
        loss_q = nn::cross_entropy_loss(pq, batch.yq).value;
        nn::Tensor gq = nn::softmax_ce_logit_grad(pq, batch.yq);
        for (double& v : gq.values()) v *= cfg.lambda_qa;
        nn::Tensor dq = m.qa.backward_from_logits(gq);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dq[i];
      }
      require(std::isfinite(loss_r) && std::isfinite(loss_q), ErrorKind::Numeric, "deepbeat: loss became non-finite");
      m.encoder.backward(m.shared.backward(dh));
      adam.step(params);

      const auto n = static_cast<double>(e - b);
      rec.train_rhythm += loss_r * n;
      rec.train_qa += loss_q * n;
    }
    const auto n = static_cast<double>(train.count);
    rec.train_rhythm /= n;
    rec.train_qa /= n;
    rec.train_total = rec.train_rhythm + cfg.lambda_qa * rec.train_qa;
    if (val.count > 0) {
      evaluate(m, val, cfg.lambda_qa, rec);
    } else {
      rec.val_rhythm = rec.train_rhythm;
      rec.val_qa = rec.train_qa;
      rec.val_total = rec.train_total;
    }
    m.history.push_back(rec);
    if (rec.val_total < best_loss) {
      best_loss = rec.val_total;
      best = nn::snapshot(params);
    }
  }
  nn::restore(params, best);
  m.trained = true;
}

std::vector<Prediction> infer(DeepBeatModel& m, const std::vector<double>& windows, std::size_t count) {
  require(windows.size() == count * kWindowLength, ErrorKind::Shape,
          "infer: expected " + std::to_string(count) + " windows of 800 samples");
  std::vector<Prediction> out(count);
  const nn::RunContext ctx{nn::Mode::Infer, 0};
  for (std::size_t b = 0; b < count; b += kInferChunk) {
    const std::size_t e = std::min(count, b + kInferChunk);
    nn::Tensor x({e - b, kWindowLength, 1});
    std::copy_n(windows.data() + b * kWindowLength, x.size(), x.data());
    nn::Tensor h = forward_trunk(m, x, ctx);
    nn::Tensor pr = m.rhythm.forward(h, ctx);
    nn::Tensor pq = m.qa.forward(h, ctx);
    for (std::size_t i = 0; i < e - b; ++i) {
      for (std::size_t c = 0; c < kRhythmClasses; ++c) out[b + i].rhythm_probs[c] = pr[i * kRhythmClasses + c];
      for (std::size_t c = 0; c < kQualityClasses; ++c) out[b + i].qa_probs[c] = pq[i * kQualityClasses + c];
    }
  }
  return out;
}

Prediction infer(DeepBeatModel& m, const Window& w) {
  require(w.samples.size() == kWindowLength, ErrorKind::Shape,
          "infer: window has " + std::to_string(w.samples.size()) + " samples, expected 800");
  return infer(m, w.samples, 1).front();
}

}  // namespace deepbeat::net
