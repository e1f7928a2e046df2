#include "deepbeat/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "deepbeat/error.hpp"

namespace deepbeat::eval {

Confusion confusion(std::span<const EvalRecord> records, double threshold) {
  Confusion c;
  for (const EvalRecord& r : records) {
    const bool called = r.pred.p_af() >= threshold;
    const bool af = r.truth == Rhythm::AF;
    if (called && af) ++c.tp;
    else if (called) ++c.fp;
    else if (af) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Prf1 prf1_from_counts(const Confusion& c) {
  Prf1 r;
  r.counts = c;
  r.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

Prf1 prf1(std::span<const EvalRecord> records, double threshold) {
  require(!records.empty(), ErrorKind::Config, "prf1: no records");
  return prf1_from_counts(confusion(records, threshold));
}

namespace {

// Walks unique scores from high to low; emit(threshold, tp, fp) after each group.
template <class F>
void sweep(std::span<const double> scores, std::span<const int> labels, F emit) {
  require(scores.size() == labels.size(), ErrorKind::Shape, "auprc: scores and labels differ in length");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    for (; i < idx.size() && scores[idx[i]] == s; ++i) (labels[idx[i]] != 0 ? tp : fp)++;
    emit(s, tp, fp);
  }
}

std::size_t positives(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
}

}  // namespace

double auprc(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t pos = positives(labels);
  require(pos > 0 && pos < labels.size(), ErrorKind::UndefinedMetric,
          "auprc needs at least one positive and one negative label");
  double area = 0.0, prev_recall = 0.0;
  sweep(scores, labels, [&](double, std::size_t tp, std::size_t fp) {
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  });
  return area;
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t pos = positives(labels);
  std::vector<PrPoint> out;
  sweep(scores, labels, [&](double s, std::size_t tp, std::size_t fp) {
    out.push_back({s, static_cast<double>(tp) / static_cast<double>(tp + fp),
                   pos > 0 ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0});
  });
  return out;
}

GateResult qa_gate(std::span<const EvalRecord> records, Quality level) {
  GateResult g;
  for (const EvalRecord& r : records) {
    if (r.pred.qa_argmax() == level) g.retained.push_back(r);
    else ++g.gated_out;
  }
  return g;
}

Fraction episode_sensitivity(std::span<const EvalRecord> records, double threshold) {
  std::map<std::string, std::pair<bool, bool>> episodes;  // id -> (is AF, detected)
  for (const EvalRecord& r : records) {
    const bool has_id = r.episode_id.has_value() && !r.episode_id->empty();
    if (!has_id && r.truth != Rhythm::AF) continue;
    require(has_id, ErrorKind::Data,
            "episode sensitivity: window " + r.window_id + " has no episode id");
    auto [it, fresh] = episodes.try_emplace(*r.episode_id, r.truth == Rhythm::AF, false);
    require(fresh || it->second.first == (r.truth == Rhythm::AF), ErrorKind::Data,
            "episode " + *r.episode_id + " mixes AF and non-AF windows");
    if (r.pred.p_af() >= threshold) it->second.second = true;
  }
  Fraction f;
  for (const auto& [id, e] : episodes) {
    if (!e.first) continue;
    ++f.denominator;
    if (e.second) ++f.numerator;
  }
  require(f.denominator > 0, ErrorKind::UndefinedMetric, "episode sensitivity: no AF episodes");
  f.value = static_cast<double>(f.numerator) / static_cast<double>(f.denominator);
  return f;
}

Fraction false_positive_rate(std::span<const EvalRecord> records, double threshold) {
  require(!records.empty(), ErrorKind::UndefinedMetric, "false-positive rate: no windows");
  Fraction f;
  for (const EvalRecord& r : records) {
    require(r.truth != Rhythm::AF, ErrorKind::Data,
            "false-positive rate: window " + r.window_id + " is labeled AF");
    ++f.denominator;
    if (r.pred.p_af() >= threshold) ++f.numerator;
  }
  f.value = static_cast<double>(f.numerator) / static_cast<double>(f.denominator);
  return f;
}

MetricsReport evaluate(std::span<const EvalRecord> all, const EvalOptions& opt) {
  std::vector<EvalRecord> kept;
  MetricsReport rep;
  if (opt.gate) {
    GateResult g = qa_gate(all, *opt.gate);
    kept = std::move(g.retained);
    rep.n_gated_out = g.gated_out;
  } else {
    kept.assign(all.begin(), all.end());
  }
  rep.n_windows = kept.size();
  const Prf1 p = prf1_from_counts(confusion(kept, opt.threshold));
  rep.precision = p.precision;
  rep.recall = p.recall;
  rep.f1 = p.f1;
  rep.counts = p.counts;

  std::vector<double> scores;
  std::vector<int> labels;
  for (const EvalRecord& r : kept) {
    scores.push_back(r.pred.p_af());
    labels.push_back(r.truth == Rhythm::AF ? 1 : 0);
  }
  const std::size_t pos = positives(labels);
  if (pos > 0 && pos < labels.size()) rep.auprc = auprc(scores, labels);
  rep.curve = pr_curve(scores, labels);

  if (opt.episodes) rep.episode_sensitivity = episode_sensitivity(kept, opt.threshold);
  if (opt.fpr) {
    std::set<std::string> af_subjects;
    for (const EvalRecord& r : all)
      if (r.truth == Rhythm::AF) af_subjects.insert(r.subject_id);
    std::vector<EvalRecord> clear;
    for (const EvalRecord& r : kept)
      if (!af_subjects.count(r.subject_id)) clear.push_back(r);
    rep.false_positive_rate = false_positive_rate(clear, opt.threshold);
  }
  return rep;
}

namespace {

nlohmann::ordered_json fraction_json(const Fraction& f) {
  nlohmann::ordered_json j;
  j["value"] = f.value;
  j["numerator"] = f.numerator;
  j["denominator"] = f.denominator;
  return j;
}

}  // namespace

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auprc"] = r.auprc ? nlohmann::ordered_json(*r.auprc) : nlohmann::ordered_json(nullptr);
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  j["tn"] = r.counts.tn;
  j["n_windows"] = r.n_windows;
  j["n_gated_out"] = r.n_gated_out;
  if (r.episode_sensitivity) j["episode_sensitivity"] = fraction_json(*r.episode_sensitivity);
  if (r.false_positive_rate) j["false_positive_rate"] = fraction_json(*r.false_positive_rate);
  return j.dump(2) + "\n";
}

std::string pr_curve_tsv(const std::vector<PrPoint>& curve) {
  std::string out = "threshold\tprecision\trecall\n";
  char buf[96];
  for (const PrPoint& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\t%.17g\n", p.threshold, p.precision, p.recall);
    out += buf;
  }
  return out;
}

}  // namespace deepbeat::eval
