#include "deepbeat/cdae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "deepbeat/error.hpp"
#include "deepbeat/nn/adam.hpp"
#include "deepbeat/nn/loss.hpp"

namespace deepbeat::cdae {

using nn::Activation;
using nn::LayerSpec;
using nn::Padding;

std::string_view to_string(Profile p) { return p == Profile::Paper ? "paper" : "mini"; }

std::optional<Profile> parse_profile(std::string_view s) {
  if (s == "paper") return Profile::Paper;
  if (s == "mini") return Profile::Mini;
  return std::nullopt;
}

std::size_t scaled_width(Profile p, std::size_t w) { return p == Profile::Paper ? w : (w + 2) / 4; }

std::vector<LayerSpec> encoder_specs(Profile p) {
  // Kernel sizes and pool factors follow from (k * c_in + 1) * c_out = params
  // and the printed lengths 800 -> 266 -> 88 -> 44.
  const auto w = [p](std::size_t c) { return scaled_width(p, c); };
  return {
      LayerSpec::conv1d(w(64), 10, 1, Padding::Same, Activation::ReLU), LayerSpec::max_pool(3),
      LayerSpec::conv1d(w(45), 8, 1, Padding::Same, Activation::ReLU),  LayerSpec::max_pool(3),
      LayerSpec::conv1d(w(50), 5, 1, Padding::Same, Activation::ReLU),  LayerSpec::max_pool(2),
  };
}

std::vector<LayerSpec> decoder_specs(Profile p) {
  const auto w = [p](std::size_t c) { return scaled_width(p, c); };
  return {
      LayerSpec::conv1d(w(50), 5, 1, Padding::Same, Activation::ReLU),  LayerSpec::upsample(2),
      LayerSpec::conv1d(w(45), 8, 1, Padding::Same, Activation::ReLU),  LayerSpec::upsample(3),
      LayerSpec::conv1d(w(64), 10, 1, Padding::Same, Activation::ReLU), LayerSpec::upsample(3),
      LayerSpec::flatten(),
      // 792 * channels -> 800: the table's flatten width, taken literally.
      LayerSpec::dense(kWindowLength, Activation::Linear),
  };
}

CdaeModel build_cdae(Profile profile, std::uint64_t seed) {
  auto specs = encoder_specs(profile);
  for (auto& s : decoder_specs(profile)) specs.push_back(s);
  return build_cdae(profile, seed, specs);
}

CdaeModel build_cdae(Profile profile, std::uint64_t seed, const std::vector<LayerSpec>& specs) {
  CdaeModel m;
  m.profile = profile;
  m.seed = seed;
  for (const auto& s : specs) m.net.add(s);
  require(m.net.output_shape() == nn::Shape{kWindowLength}, ErrorKind::Shape,
          "cdae: layer list must end in an 800-wide output, got " + nn::shape_string(m.net.output_shape()));
  require(m.net.size() > kEncoderLayers, ErrorKind::Shape, "cdae: layer list too short for an encoder");
  Rng rng = make_rng(seed, {0xcdae});
  m.net.initialize(rng);
  return m;
}

PlateauSchedule::PlateauSchedule(std::size_t patience, double factor, double min_lr)
    : patience_(patience), factor_(factor), min_lr_(min_lr), best_(std::numeric_limits<double>::infinity()) {
  require(patience >= 1 && factor > 0.0 && factor < 1.0 && min_lr > 0.0, ErrorKind::Config,
          "plateau schedule: need patience >= 1, factor in (0, 1), min_lr > 0");
}

double PlateauSchedule::observe(double loss, double lr) {
  reduced_ = false;
  if (loss < best_) {
    best_ = loss;
    wait_ = 0;
    return lr;
  }
  if (++wait_ < patience_) return lr;
  wait_ = 0;
  const double next = std::max(lr * factor_, min_lr_);
  reduced_ = next < lr;
  return next;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && !a.empty(), ErrorKind::Shape, "mse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

namespace {

constexpr std::size_t kInferChunk = 64;

void check_pairs(const PairSet& p, const char* name) {
  require(p.noisy.size() == p.count * kWindowLength && p.clean.size() == p.count * kWindowLength,
          ErrorKind::Shape, std::string("cdae: ") + name + " pair buffers do not hold count x 800 values");
}

nn::Tensor gather(const std::vector<double>& src, const std::vector<std::size_t>& idx, std::size_t begin,
                  std::size_t end, nn::Shape per_sample) {
  nn::Shape shape{end - begin};
  shape.insert(shape.end(), per_sample.begin(), per_sample.end());
  nn::Tensor t(shape);
  for (std::size_t i = begin; i < end; ++i)
    std::copy_n(src.data() + idx[i] * kWindowLength, kWindowLength, t.data() + (i - begin) * kWindowLength);
  return t;
}

double evaluate_mse(CdaeModel& m, const PairSet& p) {
  nn::Tensor out = forward_windows(m.net, p.noisy, p.count, m.net.size());
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - p.clean[i]) * (out[i] - p.clean[i]);
  return s / static_cast<double>(out.size());
}

}  // namespace

nn::Tensor forward_windows(nn::Sequential& net, const std::vector<double>& windows, std::size_t count,
                           std::size_t end) {
  require(windows.size() == count * kWindowLength, ErrorKind::Shape,
          "expected " + std::to_string(count) + " windows of 800 samples, got " + std::to_string(windows.size()) +
              " values");
  require(net.input_shape() == nn::Shape{kWindowLength, 1}, ErrorKind::Shape, "network input is not [800, 1]");
  nn::Shape per = end == 0 ? net.input_shape() : net.layer(end - 1).output_shape();
  nn::Shape shape{count};
  shape.insert(shape.end(), per.begin(), per.end());
  nn::Tensor out(shape);
  const std::size_t width = nn::shape_size(per);
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  const nn::RunContext ctx{nn::Mode::Infer, 0};
  for (std::size_t b = 0; b < count; b += kInferChunk) {
    const std::size_t e = std::min(count, b + kInferChunk);
    nn::Tensor y = net.forward(gather(windows, idx, b, e, {kWindowLength, 1}), ctx, 0, end);
    std::copy_n(y.data(), y.size(), out.data() + b * width);
  }
  return out;
}

void pretrain(CdaeModel& m, const PairSet& train, const PairSet& val, const PretrainConfig& cfg) {
  require(train.count > 0, ErrorKind::Config, "cdae pretraining needs a non-empty training set");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1, ErrorKind::Config, "cdae: epochs and batch size must be positive");
  check_pairs(train, "training");
  check_pairs(val, "validation");

  nn::Adam adam(nn::AdamConfig{cfg.lr});
  PlateauSchedule schedule(cfg.patience, cfg.lr_factor, cfg.min_lr);
  auto params = m.net.parameters();
  std::vector<nn::Tensor> best = nn::snapshot(params);
  double best_loss = std::numeric_limits<double>::infinity();
  double lr = cfg.lr;
  m.history.clear();

  std::vector<std::size_t> order(train.count);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cfg.seed, {0xcdae, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    adam.set_lr(lr);
    double total = 0.0;
    for (std::size_t b = 0, batch = 0; b < train.count; b += cfg.batch_size, ++batch) {
      const std::size_t e = std::min(train.count, b + cfg.batch_size);
      nn::Tensor x = gather(train.noisy, order, b, e, {kWindowLength, 1});
      nn::Tensor y = gather(train.clean, order, b, e, {kWindowLength});
      const nn::RunContext ctx{nn::Mode::Train, derive_seed(cfg.seed, {0xd0, epoch, batch})};
      nn::Tensor out = m.net.forward(x, ctx);
      nn::LossResult loss = nn::mse_loss(out, y);
      require(std::isfinite(loss.value), ErrorKind::Numeric, "cdae: loss became non-finite");
      m.net.zero_grad();
      m.net.backward(loss.grad);
      adam.step(params);
      total += loss.value * static_cast<double>(e - b);
    }
    EpochRecord rec{epoch, total / static_cast<double>(train.count), 0.0, lr};
    rec.val_mse = val.count > 0 ? evaluate_mse(m, val) : rec.train_mse;
    m.history.push_back(rec);
    if (rec.val_mse < best_loss) {
      best_loss = rec.val_mse;
      best = nn::snapshot(params);
    }
    lr = schedule.observe(rec.val_mse, lr);
  }
  nn::restore(params, best);
  m.trained = true;
}

nn::Tensor encode(CdaeModel& m, const std::vector<double>& windows, std::size_t count) {
  return forward_windows(m.net, windows, count, kEncoderLayers);
}

nn::Tensor denoise(CdaeModel& m, const std::vector<double>& windows, std::size_t count) {
  return forward_windows(m.net, windows, count, m.net.size());
}

}  // namespace deepbeat::cdae
