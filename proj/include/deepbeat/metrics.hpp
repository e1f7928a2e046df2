#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepbeat/types.hpp"

namespace deepbeat::eval {

struct EvalRecord {
  std::string window_id;
  std::string subject_id;
  Rhythm truth = Rhythm::Sinus;
  std::optional<Quality> true_qa;
  Prediction pred;
  std::optional<std::string> episode_id;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Prf1 {
  double precision = 0, recall = 0, f1 = 0;
  Confusion counts;
};

/// A window is called AF when P(AF) >= threshold.
Confusion confusion(std::span<const EvalRecord> records, double threshold = 0.5);
/// Empty denominators give 0 rather than an error.
Prf1 prf1_from_counts(const Confusion& c);
Prf1 prf1(std::span<const EvalRecord> records, double threshold = 0.5);

/// Step-wise average precision over descending unique scores; tied scores
/// enter together. labels are 1 for the positive class. Throws
/// UndefinedMetric unless both classes are present.
double auprc(std::span<const double> scores, std::span<const int> labels);

struct PrPoint {
  double threshold = 0, precision = 0, recall = 0;
};
/// One point per unique score, highest threshold first.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

struct GateResult {
  std::vector<EvalRecord> retained;
  std::size_t gated_out = 0;
};
/// Keeps records whose predicted quality (argmax) equals level.
GateResult qa_gate(std::span<const EvalRecord> records, Quality level = Quality::Excellent);

/// value = numerator / denominator, carried together.
struct Fraction {
  double value = 0;
  std::size_t numerator = 0;
  std::size_t denominator = 0;
};

/// An AF episode is detected when at least one of its windows is called AF.
/// Non-AF windows without an episode id are ignored.
Fraction episode_sensitivity(std::span<const EvalRecord> records, double threshold = 0.5);
/// Fraction of (non-AF) windows called AF.
Fraction false_positive_rate(std::span<const EvalRecord> records, double threshold = 0.5);

struct EvalOptions {
  double threshold = 0.5;
  std::optional<Quality> gate;  // nullopt: no gating
  bool episodes = false;
  bool fpr = false;
};

struct MetricsReport {
  double precision = 0, recall = 0, f1 = 0;
  std::optional<double> auprc;  // absent when the retained set lacks a class
  Confusion counts;
  std::size_t n_windows = 0;
  std::size_t n_gated_out = 0;
  std::optional<Fraction> episode_sensitivity;
  std::optional<Fraction> false_positive_rate;
  std::vector<PrPoint> curve;
};

/// Gate, then compute every metric on the retained windows. The false-positive
/// rate uses the retained windows of subjects with no AF window.
MetricsReport evaluate(std::span<const EvalRecord> records, const EvalOptions& options = {});

/// Structured text with the fixed keys precision, recall, f1, auprc, tp, fp,
/// fn, tn, n_windows, n_gated_out and, when computed, episode_sensitivity and
/// false_positive_rate.
std::string to_json(const MetricsReport& report);
/// "threshold\tprecision\trecall" rows.
std::string pr_curve_tsv(const std::vector<PrPoint>& curve);

}  // namespace deepbeat::eval
