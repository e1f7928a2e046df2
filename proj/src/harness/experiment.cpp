#include "deepbeat/harness/experiment.hpp"

#include <cstdio>
#include <cstdlib>

#include <json.hpp>

#include "deepbeat/error.hpp"
#include "deepbeat/features.hpp"
#include "deepbeat/harness/checkpoint.hpp"
#include "deepbeat/parallel.hpp"
#include "fileio.hpp"

namespace deepbeat::harness {

std::string config_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_run_record(const std::filesystem::path& dir, std::string_view command, std::uint64_t seed,
                      const std::string& config_json) {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  if (!config_json.empty()) {
    try {
      config = nlohmann::ordered_json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, "run record: configuration is not valid JSON: " + std::string(e.what()));
    }
  }
  const std::string canonical = config.dump();
  nlohmann::ordered_json r;
  r["command"] = std::string(command);
  r["seed"] = seed;
  r["config_digest"] = config_digest(canonical);
  r["config"] = config;
  r["versions"] = {{"deepbeat", std::string(kVersion)},
                   {"dataset_format", kDatasetVersion},
                   {"checkpoint_format", kCheckpointVersion}};
  detail::ensure_dir(dir);
  detail::atomic_write(dir / "run.json", r.dump(2) + "\n");
}

std::filesystem::path default_out_dir() {
  const char* env = std::getenv("DEEPBEAT_OUT_DIR");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path(".");
}

baseline::FeatureMatrix feature_matrix(const DatasetBundle& b, const std::vector<std::size_t>& idx) {
  baseline::FeatureMatrix X(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) {
    X[k] = baseline::extract_features(b.window(idx[k]), b.fs).as_array();
  });
  return X;
}

baseline::Forest train_forest(const DatasetBundle& b, const baseline::ForestConfig& config) {
  const auto idx = partition_indices(b, Partition::Train);
  require(!idx.empty(), ErrorKind::Config, "random forest: the train partition is empty");
  std::vector<Rhythm> rhythm;
  std::vector<Quality> qa;
  for (std::size_t i : idx) {
    rhythm.push_back(b.labels[i].rhythm);
    qa.push_back(b.labels[i].qa);
  }
  return baseline::fit_forest(feature_matrix(b, idx), rhythm, qa, config);
}

std::vector<eval::EvalRecord> eval_records(const DatasetBundle& b, const std::vector<std::size_t>& idx,
                                           const std::vector<Prediction>& preds) {
  require(idx.size() == preds.size(), ErrorKind::Shape, "evaluation: prediction count mismatch");
  std::vector<eval::EvalRecord> out;
  out.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const WindowLabel& l = b.labels[idx[k]];
    eval::EvalRecord r;
    r.window_id = l.window_id;
    r.subject_id = l.subject_id;
    r.truth = l.rhythm;
    r.true_qa = l.qa;
    r.pred = preds[k];
    if (!l.episode_id.empty()) r.episode_id = l.episode_id;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Prediction> predict(net::DeepBeatModel& model, const DatasetBundle& b, const std::vector<std::size_t>& idx) {
  return net::infer(model, gather_windows(b, idx), idx.size());
}

std::vector<Prediction> predict(const baseline::Forest& forest, const DatasetBundle& b,
                                const std::vector<std::size_t>& idx) {
  const auto X = feature_matrix(b, idx);
  std::vector<Prediction> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto p = baseline::predict_forest(forest, X[k]);
    for (std::size_t c = 0; c < kRhythmClasses; ++c) out[k].rhythm_probs[c] = p.rhythm[c];
    for (std::size_t c = 0; c < kQualityClasses; ++c) out[k].qa_probs[c] = p.qa[c];
  }
  return out;
}

eval::MetricsReport evaluate_model(net::DeepBeatModel& model, const DatasetBundle& b, Partition p,
                                   const eval::EvalOptions& options) {
  const auto idx = partition_indices(b, p);
  require(!idx.empty(), ErrorKind::Data, "evaluation: partition " + std::string(to_string(p)) + " is empty");
  const auto records = eval_records(b, idx, predict(model, b, idx));
  return eval::evaluate(records, options);
}

eval::MetricsReport evaluate_forest(const baseline::Forest& forest, const DatasetBundle& b, Partition p,
                                    const eval::EvalOptions& options) {
  const auto idx = partition_indices(b, p);
  require(!idx.empty(), ErrorKind::Data, "evaluation: partition " + std::string(to_string(p)) + " is empty");
  const auto records = eval_records(b, idx, predict(forest, b, idx));
  return eval::evaluate(records, options);
}

namespace {

void append_rows(std::vector<TableRow>& rows, const std::string& section, const nn::Shape& input,
                 const std::vector<nn::LayerSpec>& specs, bool flag_valid_conv) {
  const auto described = nn::describe(input, specs);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    TableRow r{section, std::string(nn::display_name(specs[i].kind)), described[i].output, described[i].params, false};
    r.exception = flag_valid_conv && specs[i].kind == nn::LayerKind::Conv1D && specs[i].padding == nn::Padding::Valid;
    rows.push_back(std::move(r));
  }
}

std::vector<TableRow> cdae_rows(const std::vector<nn::LayerSpec>& specs) {
  std::vector<TableRow> rows{{"input", "InputLayer", {kWindowLength, 1}, 0, false}};
  const std::vector<nn::LayerSpec> enc(specs.begin(), specs.begin() + cdae::kEncoderLayers);
  const std::vector<nn::LayerSpec> dec(specs.begin() + cdae::kEncoderLayers, specs.end());
  append_rows(rows, "encoder", {kWindowLength, 1}, enc, false);
  append_rows(rows, "decoder", rows.back().output, dec, false);
  return rows;
}

std::vector<TableRow> deepbeat_rows(const net::DeepBeatSpecs& s) {
  std::vector<TableRow> rows{{"input", "InputLayer", {kWindowLength, 1}, 0, false}};
  append_rows(rows, "encoder", {kWindowLength, 1}, s.encoder, false);
  append_rows(rows, "shared", rows.back().output, s.shared, false);
  const nn::Shape trunk = rows.back().output;
  append_rows(rows, "rhythm", trunk, s.rhythm, true);
  append_rows(rows, "qa", trunk, s.qa, false);
  return rows;
}

std::string with_commas(std::size_t n) {
  std::string digits = std::to_string(n), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

}  // namespace

std::vector<TableRow> layer_table(ModelKind kind, cdae::Profile profile) {
  switch (kind) {
    case ModelKind::Cdae: {
      auto specs = cdae::encoder_specs(profile);
      for (auto& s : cdae::decoder_specs(profile)) specs.push_back(s);
      return cdae_rows(specs);
    }
    case ModelKind::DeepBeat: return deepbeat_rows(net::deepbeat_specs(profile));
    case ModelKind::Forest: break;
  }
  fail(ErrorKind::Config, "layer tables exist only for cdae and deepbeat models");
}

std::vector<TableRow> layer_table(const cdae::CdaeModel& m) { return cdae_rows(m.net.specs()); }

std::vector<TableRow> layer_table(const net::DeepBeatModel& m) {
  return deepbeat_rows({m.encoder.specs(), m.shared.specs(), m.rhythm.specs(), m.qa.specs()});
}

std::string format_layer_table(const std::vector<TableRow>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %-18s %12s\n", "Layer (type)", "Output Shape", "Param #");
  out += buf;
  std::string section;
  std::size_t total = 0;
  bool any_exception = false;
  for (const TableRow& r : rows) {
    if (r.section != section) {
      section = r.section;
      out += "# " + section + "\n";
    }
    std::snprintf(buf, sizeof buf, "%-20s %-18s %12s%s\n", r.layer.c_str(), nn::shape_string(r.output).c_str(),
                  with_commas(r.params).c_str(), r.exception ? " *" : "");
    out += buf;
    total += r.params;
    any_exception = any_exception || r.exception;
  }
  out += "Total params: " + with_commas(total) + "\n";
  if (any_exception)
    out += "* k=2 valid stride-2 conv: the only shape-consistent layer here; its count cannot equal 525\n";
  return out;
}

}  // namespace deepbeat::harness
