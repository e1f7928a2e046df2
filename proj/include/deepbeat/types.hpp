#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deepbeat {

enum class Rhythm { Sinus = 0, AF = 1 };
enum class Quality { Excellent = 0, Acceptable = 1, Poor = 2 };
enum class Partition { Train = 0, Val = 1, Test = 2 };

inline constexpr std::size_t kRhythmClasses = 2;
inline constexpr std::size_t kQualityClasses = 3;
inline constexpr std::size_t kWindowLength = 800;
inline constexpr double kWindowFs = 32.0;
inline constexpr double kWindowSeconds = 25.0;

/// Raw single-channel trace.
struct SignalMeta {
  std::string subject_id;
  std::optional<Rhythm> rhythm;
  double noise_factor = 0.0;
};

struct Signal {
  std::vector<double> samples;
  double fs = 128.0;
  std::optional<SignalMeta> meta;

  double duration() const { return static_cast<double>(samples.size()) / fs; }
};

/// Preprocessed, [0,1]-normalized model input.
struct Window {
  std::vector<double> samples;
  double fs_effective = kWindowFs;
  std::optional<Rhythm> rhythm;
  std::optional<Quality> qa;
  std::string subject_id;
  std::string source_id;
  std::size_t start = 0;
};

struct Prediction {
  std::array<double, kRhythmClasses> rhythm_probs{};
  std::array<double, kQualityClasses> qa_probs{};

  double p_af() const { return rhythm_probs[1]; }
  Rhythm rhythm_argmax() const { return rhythm_probs[1] > rhythm_probs[0] ? Rhythm::AF : Rhythm::Sinus; }
  Quality qa_argmax() const;
};

inline std::string_view to_string(Rhythm r) noexcept { return r == Rhythm::AF ? "af" : "sinus"; }

inline std::string_view to_string(Quality q) noexcept {
  switch (q) {
    case Quality::Excellent: return "excellent";
    case Quality::Acceptable: return "acceptable";
    case Quality::Poor: return "poor";
  }
  return "unknown";
}

inline std::string_view to_string(Partition p) noexcept {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Val: return "val";
    case Partition::Test: return "test";
  }
  return "unknown";
}

inline std::optional<Rhythm> parse_rhythm(std::string_view s) noexcept {
  if (s == "sinus") return Rhythm::Sinus;
  if (s == "af") return Rhythm::AF;
  return std::nullopt;
}

inline std::optional<Quality> parse_quality(std::string_view s) noexcept {
  if (s == "excellent") return Quality::Excellent;
  if (s == "acceptable") return Quality::Acceptable;
  // "noise" is the same class under another name
  if (s == "poor" || s == "noise") return Quality::Poor;
  return std::nullopt;
}

inline std::optional<Partition> parse_partition(std::string_view s) noexcept {
  if (s == "train") return Partition::Train;
  if (s == "val" || s == "validate") return Partition::Val;
  if (s == "test") return Partition::Test;
  return std::nullopt;
}

inline Quality Prediction::qa_argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kQualityClasses; ++i)
    if (qa_probs[i] > qa_probs[best]) best = i;
  return static_cast<Quality>(best);
}

}  // namespace deepbeat
