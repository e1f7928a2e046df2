#include "deepbeat/interpret.hpp"

#include <algorithm>
#include <cmath>

#include "deepbeat/error.hpp"

namespace deepbeat::interpret {

std::string_view to_string(SaliencyLayer l) {
  switch (l) {
    case SaliencyLayer::Rhythm: return "rhythm";
    case SaliencyLayer::Shared: return "shared";
    case SaliencyLayer::Encoder: return "encoder";
  }
  return "unknown";
}

std::optional<SaliencyLayer> parse_saliency_layer(std::string_view s) {
  for (SaliencyLayer l : {SaliencyLayer::Rhythm, SaliencyLayer::Shared, SaliencyLayer::Encoder})
    if (to_string(l) == s) return l;
  return std::nullopt;
}

std::vector<double> upsample_linear(const std::vector<double>& x, std::size_t n) {
  require(!x.empty() && n > 0, ErrorKind::Shape, "upsample_linear: empty input or output");
  std::vector<double> out(n);
  const double scale = static_cast<double>(x.size()) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(x.size() - 1));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    const double t = pos - static_cast<double>(lo);
    out[i] = (1.0 - t) * x[lo] + t * x[hi];
  }
  return out;
}

namespace {

// A contiguous run of layers in one section, in forward order.
struct Segment {
  nn::Sequential* net;
  std::size_t begin, end;
};

std::size_t last_of(const nn::Sequential& s, nn::LayerKind kind) {
  for (std::size_t i = s.size(); i-- > 0;)
    if (s.layer(i).spec().kind == kind) return i;
  fail(ErrorKind::Shape, "saliency: section has no layer of the requested kind");
}

}  // namespace

SaliencyMap saliency(net::DeepBeatModel& m, const Window& w, Rhythm target, SaliencyLayer layer) {
  require(m.trained, ErrorKind::State, "saliency needs a trained model");
  require(w.samples.size() == kWindowLength, ErrorKind::Shape, "saliency: window must have 800 samples");

  // Split the forward chain at the chosen activation: `head` produces it,
  // `tail` maps it to the rhythm logits.
  std::vector<Segment> head, tail;
  const std::size_t r_last = m.rhythm.size() - 1;
  switch (layer) {
    case SaliencyLayer::Rhythm: {
      const std::size_t k = last_of(m.rhythm, nn::LayerKind::Conv1D) + 1;
      head = {{&m.encoder, 0, m.encoder.size()}, {&m.shared, 0, m.shared.size()}, {&m.rhythm, 0, k}};
      tail = {{&m.rhythm, k, r_last}};
      break;
    }
    case SaliencyLayer::Shared: {
      std::size_t k = last_of(m.shared, nn::LayerKind::Conv1D) + 1;
      if (k < m.shared.size() && m.shared.layer(k).spec().kind == nn::LayerKind::LeakyReLU) ++k;
      head = {{&m.encoder, 0, m.encoder.size()}, {&m.shared, 0, k}};
      tail = {{&m.shared, k, m.shared.size()}, {&m.rhythm, 0, r_last}};
      break;
    }
    case SaliencyLayer::Encoder: {
      const std::size_t k = last_of(m.encoder, nn::LayerKind::Conv1D) + 1;
      head = {{&m.encoder, 0, k}};
      tail = {{&m.encoder, k, m.encoder.size()}, {&m.shared, 0, m.shared.size()}, {&m.rhythm, 0, r_last}};
      break;
    }
  }

  const nn::RunContext ctx{nn::Mode::Infer, 0};
  nn::Tensor h({1, kWindowLength, 1}, std::vector<double>(w.samples));
  for (const Segment& s : head) h = s.net->forward(h, ctx, s.begin, s.end);
  const nn::Tensor act = h;
  for (const Segment& s : tail) h = s.net->forward(h, ctx, s.begin, s.end);
  nn::Layer& logit_layer = m.rhythm.layer(r_last);
  logit_layer.forward(h, ctx);
  const std::size_t k = kRhythmClasses;

  // d(z_c - mean z)/dz
  nn::Tensor g({1, k}, -1.0 / static_cast<double>(k));
  g[static_cast<std::size_t>(target)] += 1.0;
  g = nn::dense_backward_pre_activation(logit_layer, g);
  for (auto it = tail.rbegin(); it != tail.rend(); ++it) g = it->net->backward(g, it->begin, it->end);
  for (nn::Sequential* s : {&m.encoder, &m.shared, &m.rhythm, &m.qa}) s->zero_grad();

  const std::size_t L = act.dim(1), C = act.dim(2);
  std::vector<double> alpha(C, 0.0), cam(L, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t c = 0; c < C; ++c) alpha[c] += g[l * C + c] / static_cast<double>(L);
  for (std::size_t l = 0; l < L; ++l) {
    double v = 0.0;
    for (std::size_t c = 0; c < C; ++c) v += alpha[c] * act[l * C + c];
    cam[l] = std::max(v, 0.0);
  }

  SaliencyMap out;
  out.target = target;
  out.window_id = w.source_id;
  out.source_length = L;
  out.scores = upsample_linear(cam, kWindowLength);
  const double mx = *std::max_element(out.scores.begin(), out.scores.end());
  for (double& v : out.scores) v = mx > 0.0 ? v / mx : 0.0;
  return out;
}

nn::Tensor export_embeddings(net::DeepBeatModel& m, const std::vector<double>& windows, std::size_t count) {
  require(windows.size() == count * kWindowLength, ErrorKind::Shape, "embeddings: expected count x 800 samples");
  const std::size_t end = m.rhythm.size() - 1;
  const std::size_t units = nn::shape_size(m.rhythm.layer(end - 1).output_shape());
  nn::Tensor out({count, units});
  const nn::RunContext ctx{nn::Mode::Infer, 0};
  constexpr std::size_t chunk = 64;
  for (std::size_t b = 0; b < count; b += chunk) {
    const std::size_t e = std::min(count, b + chunk);
    nn::Tensor x({e - b, kWindowLength, 1});
    std::copy_n(windows.data() + b * kWindowLength, x.size(), x.data());
    nn::Tensor y = m.rhythm.forward(net::forward_trunk(m, x, ctx), ctx, 0, end);
    std::copy_n(y.data(), y.size(), out.data() + b * units);
  }
  return out;
}

}  // namespace deepbeat::interpret
