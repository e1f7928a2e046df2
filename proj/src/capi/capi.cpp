#include "deepbeat/deepbeat.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <stdexcept>
#include <string>
#include <variant>

#include "../harness/fileio.hpp"
#include "deepbeat/error.hpp"
#include "deepbeat/harness/checkpoint.hpp"
#include "deepbeat/harness/dataset_io.hpp"
#include "deepbeat/harness/experiment.hpp"
#include "deepbeat/harness/recipe.hpp"
#include "deepbeat/interpret.hpp"
#include "deepbeat/parallel.hpp"

using namespace deepbeat;

struct dbt_dataset {
  harness::DatasetBundle bundle;
};

struct dbt_model {
  std::variant<cdae::CdaeModel, net::DeepBeatModel> net;
};

struct dbt_forest {
  baseline::Forest forest;
};

namespace {

thread_local std::string g_last_error;

dbt_status to_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return DBT_ERR_CONFIG;
    case ErrorKind::Domain: return DBT_ERR_DOMAIN;
    case ErrorKind::Shape: return DBT_ERR_SHAPE;
    case ErrorKind::Numeric: return DBT_ERR_NUMERIC;
    case ErrorKind::Data: return DBT_ERR_DATA;
    case ErrorKind::State: return DBT_ERR_STATE;
    case ErrorKind::UndefinedMetric: return DBT_ERR_UNDEFINED_METRIC;
    case ErrorKind::Io: return DBT_ERR_IO;
    case ErrorKind::Format: return DBT_ERR_FORMAT;
  }
  return DBT_ERR_INTERNAL;
}

struct NullArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class F>
dbt_status guard(F f) {
  try {
    f();
    g_last_error.clear();
    return DBT_OK;
  } catch (const NullArgument& e) {
    g_last_error = e.what();
    return DBT_ERR_INVALID_ARGUMENT;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DBT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return DBT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error";
    return DBT_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw NullArgument(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out != nullptr) *out = dup(s);
}

cdae::Profile profile_of(dbt_profile p) {
  if (p == DBT_PROFILE_PAPER) return cdae::Profile::Paper;
  if (p == DBT_PROFILE_MINI) return cdae::Profile::Mini;
  throw Error(ErrorKind::Config, "unknown profile");
}

Partition partition_of(dbt_partition p) {
  if (p < DBT_TRAIN || p > DBT_TEST) throw Error(ErrorKind::Config, "unknown partition");
  return static_cast<Partition>(p);
}

cdae::CdaeModel& as_cdae(dbt_model* m) {
  auto* c = std::get_if<cdae::CdaeModel>(&m->net);
  if (c == nullptr) throw Error(ErrorKind::State, "operation needs an autoencoder model");
  return *c;
}

net::DeepBeatModel& as_deepbeat(dbt_model* m) {
  auto* d = std::get_if<net::DeepBeatModel>(&m->net);
  if (d == nullptr) throw Error(ErrorKind::State, "operation needs a DeepBeat model");
  return *d;
}

std::vector<double> to_double(const float* x, std::size_t n) { return std::vector<double>(x, x + n); }

void copy_predictions(const std::vector<Prediction>& preds, dbt_prediction* out) {
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t c = 0; c < kRhythmClasses; ++c) out[i].rhythm[c] = preds[i].rhythm_probs[c];
    for (std::size_t c = 0; c < kQualityClasses; ++c) out[i].qa[c] = preds[i].qa_probs[c];
  }
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

eval::EvalOptions eval_options(const dbt_eval_options* opt) {
  eval::EvalOptions o;
  o.threshold = opt->threshold;
  if (opt->gate >= 0) {
    if (opt->gate > DBT_POOR) throw Error(ErrorKind::Config, "unknown quality gate level");
    o.gate = static_cast<Quality>(opt->gate);
  }
  o.episodes = opt->episodes != 0;
  o.fpr = opt->fpr != 0;
  return o;
}

}  // namespace

extern "C" {

const char* dbt_version(void) { return "0.1.0"; }
const char* dbt_last_error(void) { return g_last_error.c_str(); }

const char* dbt_status_name(dbt_status s) {
  switch (s) {
    case DBT_OK: return "ok";
    case DBT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DBT_ERR_CONFIG: return "configuration error";
    case DBT_ERR_DOMAIN: return "domain error";
    case DBT_ERR_SHAPE: return "shape error";
    case DBT_ERR_NUMERIC: return "numeric error";
    case DBT_ERR_DATA: return "data error";
    case DBT_ERR_STATE: return "state error";
    case DBT_ERR_UNDEFINED_METRIC: return "undefined metric";
    case DBT_ERR_IO: return "i/o error";
    case DBT_ERR_FORMAT: return "format error";
    case DBT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void dbt_string_free(char* s) { std::free(s); }

dbt_status dbt_set_num_threads(int n) {
  return guard([&] {
    require(n >= 1, ErrorKind::Config, "thread count must be at least 1");
    set_num_threads(n);
  });
}

// ---- datasets ----

dbt_status dbt_dataset_simulate(const char* recipe_text, dbt_dataset** out) {
  return guard([&] {
    need(recipe_text, "recipe_text");
    need(out, "out");
    auto ds = std::make_unique<dbt_dataset>();
    ds->bundle = harness::build_dataset(harness::parse_recipe(recipe_text));
    *out = ds.release();
  });
}

dbt_status dbt_dataset_load(const char* dir, dbt_dataset** out) {
  return guard([&] {
    need(dir, "dir");
    need(out, "out");
    auto ds = std::make_unique<dbt_dataset>();
    ds->bundle = harness::load_dataset(dir);
    *out = ds.release();
  });
}

dbt_status dbt_dataset_save(const dbt_dataset* ds, const char* dir) {
  return guard([&] {
    need(ds, "dataset");
    need(dir, "dir");
    harness::save_dataset(ds->bundle, dir);
  });
}

void dbt_dataset_free(dbt_dataset* ds) { delete ds; }

size_t dbt_dataset_count(const dbt_dataset* ds) { return ds == nullptr ? 0 : ds->bundle.count(); }
uint64_t dbt_dataset_seed(const dbt_dataset* ds) { return ds == nullptr ? 0 : ds->bundle.seed; }

dbt_status dbt_dataset_window(const dbt_dataset* ds, size_t i, float* out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    require(i < ds->bundle.count(), ErrorKind::Shape, "window index out of range");
    std::memcpy(out, ds->bundle.windows.data() + i * kWindowLength, kWindowLength * sizeof(float));
  });
}

dbt_status dbt_dataset_label(const dbt_dataset* ds, size_t i, dbt_window_label* out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    require(i < ds->bundle.count(), ErrorKind::Shape, "window index out of range");
    const auto& l = ds->bundle.labels[i];
    out->window_id = l.window_id.c_str();
    out->subject_id = l.subject_id.c_str();
    out->episode_id = l.episode_id.c_str();
    out->partition = static_cast<dbt_partition>(l.partition);
    out->rhythm = static_cast<dbt_rhythm>(l.rhythm);
    out->qa = static_cast<dbt_quality>(l.qa);
    out->noise_factor = l.noise_factor;
  });
}

// ---- networks ----

dbt_status dbt_cdae_build(dbt_profile profile, uint64_t seed, dbt_model** out) {
  return guard([&] {
    need(out, "out");
    *out = new dbt_model{cdae::build_cdae(profile_of(profile), seed)};
  });
}

dbt_status dbt_deepbeat_build(dbt_profile profile, uint64_t seed, const dbt_model* encoder_source, dbt_model** out) {
  return dbt_deepbeat_build_dropout(profile, seed, encoder_source, net::kDropoutRate, out);
}

dbt_status dbt_deepbeat_build_dropout(dbt_profile profile, uint64_t seed, const dbt_model* encoder_source,
                                      double dropout, dbt_model** out) {
  return guard([&] {
    need(out, "out");
    require(dropout >= 0.0 && dropout < 1.0, ErrorKind::Config, "dropout rate must lie in [0, 1)");
    const cdae::CdaeModel* src = nullptr;
    if (encoder_source != nullptr) {
      src = std::get_if<cdae::CdaeModel>(&encoder_source->net);
      require(src != nullptr, ErrorKind::State, "encoder source must be an autoencoder");
    }
    const auto p = profile_of(profile);
    net::DeepBeatModel m = net::build_deepbeat(p, seed, net::deepbeat_specs(p, dropout));
    if (src != nullptr) net::transfer_encoder(*src, m);
    *out = new dbt_model{std::move(m)};
  });
}

dbt_status dbt_model_load(const char* dir, dbt_model** out) {
  return guard([&] {
    need(dir, "dir");
    need(out, "out");
    switch (harness::checkpoint_kind(dir)) {
      case harness::ModelKind::Cdae: *out = new dbt_model{harness::load_cdae(dir)}; return;
      case harness::ModelKind::DeepBeat: *out = new dbt_model{harness::load_deepbeat(dir)}; return;
      case harness::ModelKind::Forest: break;
    }
    fail(ErrorKind::Format, "checkpoint holds a forest; use dbt_forest_load");
  });
}

dbt_status dbt_model_save(const dbt_model* m, const char* dir, const char* training_json) {
  return guard([&] {
    need(m, "model");
    need(dir, "dir");
    const std::string cfg = training_json ? training_json : "";
    std::visit([&](const auto& net) { harness::save_checkpoint(net, dir, cfg); }, m->net);
  });
}

void dbt_model_free(dbt_model* m) { delete m; }

dbt_status dbt_model_kind_of(const dbt_model* m, dbt_model_kind* out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    *out = std::holds_alternative<cdae::CdaeModel>(m->net) ? DBT_MODEL_CDAE : DBT_MODEL_DEEPBEAT;
  });
}

dbt_status dbt_model_parameter_count(const dbt_model* m, size_t* out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    if (const auto* c = std::get_if<cdae::CdaeModel>(&m->net)) *out = c->net.parameter_count();
    else *out = std::get<net::DeepBeatModel>(m->net).parameter_count();
  });
}

dbt_status dbt_model_layer_table(const dbt_model* m, char** out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    std::visit([&](const auto& net) { *out = dup(harness::format_layer_table(harness::layer_table(net))); }, m->net);
  });
}

dbt_status dbt_layer_table(dbt_model_kind kind, dbt_profile profile, char** out) {
  return guard([&] {
    need(out, "out");
    require(kind == DBT_MODEL_CDAE || kind == DBT_MODEL_DEEPBEAT, ErrorKind::Config,
            "layer tables exist for cdae and deepbeat models only");
    const auto k = kind == DBT_MODEL_CDAE ? harness::ModelKind::Cdae : harness::ModelKind::DeepBeat;
    *out = dup(harness::format_layer_table(harness::layer_table(k, profile_of(profile))));
  });
}

dbt_status dbt_checkpoint_kind(const char* dir, dbt_model_kind* out) {
  return guard([&] {
    need(dir, "dir");
    need(out, "out");
    *out = static_cast<dbt_model_kind>(harness::checkpoint_kind(dir));
  });
}

void dbt_pretrain_config_init(dbt_pretrain_config* cfg) {
  if (cfg == nullptr) return;
  const cdae::PretrainConfig d;
  *cfg = {d.epochs, d.batch_size, d.lr, d.patience, d.lr_factor, d.min_lr, d.seed};
}

dbt_status dbt_cdae_pretrain(dbt_model* m, const dbt_dataset* ds, const dbt_pretrain_config* cfg, char** history_tsv) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    need(cfg, "config");
    auto& model = as_cdae(m);
    const cdae::PretrainConfig c{cfg->epochs, cfg->batch_size, cfg->lr, cfg->patience,
                                 cfg->lr_factor, cfg->min_lr, cfg->seed};
    cdae::pretrain(model, harness::pair_set(ds->bundle, Partition::Train),
                   harness::pair_set(ds->bundle, Partition::Val), c);
    std::string tsv = "epoch\ttrain_mse\tval_mse\tlr\n";
    for (const auto& h : model.history)
      tsv += std::to_string(h.epoch) + "\t" + full(h.train_mse) + "\t" + full(h.val_mse) + "\t" + full(h.lr) + "\n";
    emit(history_tsv, tsv);
  });
}

dbt_status dbt_cdae_reconstruction_mse(dbt_model* m, const dbt_dataset* ds, dbt_partition p, double* out,
                                       size_t* count) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    need(count, "count");
    auto& model = as_cdae(m);
    const auto pairs = harness::pair_set(ds->bundle, partition_of(p));
    *count = pairs.count;
    if (out == nullptr) return;
    const nn::Tensor rec = cdae::denoise(model, pairs.noisy, pairs.count);
    for (std::size_t i = 0; i < pairs.count; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindowLength; ++k) {
        const double d = rec[i * kWindowLength + k] - pairs.clean[i * kWindowLength + k];
        s += d * d;
      }
      out[i] = s / static_cast<double>(kWindowLength);
    }
  });
}

void dbt_train_config_init(dbt_train_config* cfg) {
  if (cfg == nullptr) return;
  const net::TrainConfig d;
  *cfg = {d.epochs, d.batch_size, d.lr, d.lambda_qa, d.seed};
}

dbt_status dbt_deepbeat_train(dbt_model* m, const dbt_dataset* ds, const dbt_train_config* cfg, char** history_tsv) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    need(cfg, "config");
    auto& model = as_deepbeat(m);
    const net::TrainConfig c{cfg->epochs, cfg->batch_size, cfg->lr, cfg->lambda_qa, cfg->seed};
    net::train_deepbeat(model, harness::labeled_set(ds->bundle, Partition::Train),
                        harness::labeled_set(ds->bundle, Partition::Val), c);
    std::string tsv =
        "epoch\ttrain_rhythm\ttrain_qa\ttrain_total\tval_rhythm\tval_qa\tval_total\tval_rhythm_acc\tval_qa_acc\n";
    for (const auto& h : model.history)
      tsv += std::to_string(h.epoch) + "\t" + full(h.train_rhythm) + "\t" + full(h.train_qa) + "\t" +
             full(h.train_total) + "\t" + full(h.val_rhythm) + "\t" + full(h.val_qa) + "\t" + full(h.val_total) +
             "\t" + full(h.val_rhythm_acc) + "\t" + full(h.val_qa_acc) + "\n";
    emit(history_tsv, tsv);
  });
}

dbt_status dbt_deepbeat_infer(dbt_model* m, const float* windows, size_t count, dbt_prediction* out) {
  return guard([&] {
    need(m, "model");
    need(windows, "windows");
    need(out, "out");
    auto& model = as_deepbeat(m);
    copy_predictions(net::infer(model, to_double(windows, count * kWindowLength), count), out);
  });
}

// ---- forest ----

void dbt_forest_config_init(dbt_forest_config* cfg) {
  if (cfg == nullptr) return;
  const baseline::ForestConfig d;
  *cfg = {d.n_estimators, d.seed, d.max_features, d.bootstrap ? 1 : 0};
}

dbt_status dbt_forest_train(const dbt_dataset* ds, const dbt_forest_config* cfg, dbt_forest** out) {
  return guard([&] {
    need(ds, "dataset");
    need(cfg, "config");
    need(out, "out");
    const baseline::ForestConfig c{cfg->n_estimators, cfg->seed, cfg->max_features, cfg->bootstrap != 0};
    *out = new dbt_forest{harness::train_forest(ds->bundle, c)};
  });
}

dbt_status dbt_forest_save(const dbt_forest* f, const char* dir, const char* training_json) {
  return guard([&] {
    need(f, "forest");
    need(dir, "dir");
    harness::save_checkpoint(f->forest, dir, training_json ? training_json : "");
  });
}

dbt_status dbt_forest_load(const char* dir, dbt_forest** out) {
  return guard([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new dbt_forest{harness::load_forest(dir)};
  });
}

void dbt_forest_free(dbt_forest* f) { delete f; }

dbt_status dbt_forest_predict(const dbt_forest* f, const float* windows, size_t count, dbt_prediction* out) {
  return guard([&] {
    need(f, "forest");
    need(windows, "windows");
    need(out, "out");
    std::vector<Prediction> preds(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto x = to_double(windows + i * kWindowLength, kWindowLength);
      const auto p = baseline::predict_forest(f->forest, baseline::extract_features(x, kWindowFs));
      for (std::size_t c = 0; c < kRhythmClasses; ++c) preds[i].rhythm_probs[c] = p.rhythm[c];
      for (std::size_t c = 0; c < kQualityClasses; ++c) preds[i].qa_probs[c] = p.qa[c];
    }
    copy_predictions(preds, out);
  });
}

// ---- evaluation ----

void dbt_eval_options_init(dbt_eval_options* opt) {
  if (opt == nullptr) return;
  *opt = {DBT_TEST, 0.5, -1, 0, 0};
}

dbt_status dbt_evaluate_model(dbt_model* m, const dbt_dataset* ds, const dbt_eval_options* opt, char** report_json,
                              char** pr_curve_tsv) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    need(opt, "options");
    const auto rep = harness::evaluate_model(as_deepbeat(m), ds->bundle, partition_of(opt->partition), eval_options(opt));
    emit(report_json, eval::to_json(rep));
    emit(pr_curve_tsv, eval::pr_curve_tsv(rep.curve));
  });
}

dbt_status dbt_evaluate_forest(const dbt_forest* f, const dbt_dataset* ds, const dbt_eval_options* opt,
                               char** report_json, char** pr_curve_tsv) {
  return guard([&] {
    need(f, "forest");
    need(ds, "dataset");
    need(opt, "options");
    const auto rep = harness::evaluate_forest(f->forest, ds->bundle, partition_of(opt->partition), eval_options(opt));
    emit(report_json, eval::to_json(rep));
    emit(pr_curve_tsv, eval::pr_curve_tsv(rep.curve));
  });
}

// ---- interpretation ----

dbt_status dbt_saliency(dbt_model* m, const float* window, dbt_rhythm target, dbt_saliency_layer layer, double* out) {
  return guard([&] {
    need(m, "model");
    need(window, "window");
    need(out, "out");
    require(layer >= DBT_SALIENCY_RHYTHM && layer <= DBT_SALIENCY_ENCODER, ErrorKind::Config, "unknown saliency layer");
    require(target == DBT_SINUS || target == DBT_AF, ErrorKind::Config, "unknown rhythm class");
    Window w;
    w.samples = to_double(window, kWindowLength);
    const auto map = interpret::saliency(as_deepbeat(m), w, static_cast<Rhythm>(target),
                                         static_cast<interpret::SaliencyLayer>(layer));
    std::copy(map.scores.begin(), map.scores.end(), out);
  });
}

dbt_status dbt_saliency_table(dbt_model* m, const dbt_dataset* ds, dbt_partition p, dbt_rhythm target,
                              dbt_saliency_layer layer, size_t max_windows, char** out_tsv) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    need(out_tsv, "out_tsv");
    require(layer >= DBT_SALIENCY_RHYTHM && layer <= DBT_SALIENCY_ENCODER, ErrorKind::Config, "unknown saliency layer");
    require(target == DBT_SINUS || target == DBT_AF, ErrorKind::Config, "unknown rhythm class");
    auto& model = as_deepbeat(m);
    auto idx = harness::partition_indices(ds->bundle, partition_of(p));
    if (max_windows > 0 && idx.size() > max_windows) idx.resize(max_windows);
    std::string tsv = "window_id";
    for (std::size_t k = 0; k < kWindowLength; ++k) tsv += "\ts" + std::to_string(k);
    tsv += "\n";
    for (std::size_t i : idx) {
      Window w;
      w.samples = ds->bundle.window(i);
      w.source_id = ds->bundle.labels[i].window_id;
      const auto map = interpret::saliency(model, w, static_cast<Rhythm>(target),
                                           static_cast<interpret::SaliencyLayer>(layer));
      tsv += map.window_id;
      for (double v : map.scores) tsv += "\t" + num(v);
      tsv += "\n";
    }
    *out_tsv = dup(tsv);
  });
}

dbt_status dbt_embeddings_table(dbt_model* m, const dbt_dataset* ds, dbt_partition p, char** out_tsv) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    need(out_tsv, "out_tsv");
    auto& model = as_deepbeat(m);
    const auto idx = harness::partition_indices(ds->bundle, partition_of(p));
    const nn::Tensor e = interpret::export_embeddings(model, harness::gather_windows(ds->bundle, idx), idx.size());
    const std::size_t units = idx.empty() ? 0 : e.dim(1);
    std::string tsv = "window_id\trhythm";
    for (std::size_t k = 0; k < units; ++k) tsv += "\te" + std::to_string(k);
    tsv += "\n";
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& l = ds->bundle.labels[idx[r]];
      tsv += l.window_id + "\t" + std::string(to_string(l.rhythm));
      for (std::size_t k = 0; k < units; ++k) tsv += "\t" + num(e[r * units + k]);
      tsv += "\n";
    }
    *out_tsv = dup(tsv);
  });
}

// ---- bookkeeping ----

dbt_status dbt_write_run_record(const char* dir, const char* command, uint64_t seed, const char* config_json) {
  return guard([&] {
    need(dir, "dir");
    need(command, "command");
    harness::write_run_record(dir, command, seed, config_json ? config_json : "");
  });
}

dbt_status dbt_config_digest(const char* text, char** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = dup(harness::config_digest(text));
  });
}

dbt_status dbt_default_out_dir(char** out) {
  return guard([&] {
    need(out, "out");
    *out = dup(harness::default_out_dir().string());
  });
}

dbt_status dbt_write_text(const char* dir, const char* name, const char* text) {
  return guard([&] {
    need(dir, "dir");
    need(name, "name");
    need(text, "text");
    harness::detail::ensure_dir(dir);
    harness::detail::atomic_write(std::filesystem::path(dir) / name, text);
  });
}

}  // extern "C"
