#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepbeat/deepbeat_model.hpp"
#include "deepbeat/types.hpp"

namespace deepbeat::interpret {

/// Which activation the map is taken from: the last rhythm-branch conv, the
/// last shared conv (after its leaky ReLU), or the last encoder conv.
enum class SaliencyLayer { Rhythm, Shared, Encoder };

std::string_view to_string(SaliencyLayer l);
std::optional<SaliencyLayer> parse_saliency_layer(std::string_view s);

struct SaliencyMap {
  std::vector<double> scores;  // 800 values in [0, 1]
  Rhythm target = Rhythm::AF;
  std::string window_id;
  /// Length of the activation the map was computed at, before upsampling.
  std::size_t source_length = 0;
};

/// Gradient-weighted activation map. The class score is the logit margin
/// z_c - mean(z); channel weights are the length-averaged gradients of that
/// score; the weighted sum is rectified, upsampled linearly to 800 samples
/// and divided by its maximum (all zeros stay zeros).
SaliencyMap saliency(net::DeepBeatModel& model, const Window& w, Rhythm target,
                     SaliencyLayer layer = SaliencyLayer::Rhythm);

/// Linear interpolation of a length-L profile onto n samples, sample centres aligned.
std::vector<double> upsample_linear(const std::vector<double>& x, std::size_t n);

/// Outputs of the rhythm branch's penultimate dense layer, [count, units].
nn::Tensor export_embeddings(net::DeepBeatModel& model, const std::vector<double>& windows, std::size_t count);

}  // namespace deepbeat::interpret
