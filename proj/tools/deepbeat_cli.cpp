// deepbeat command-line front end. Talks to the library only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "deepbeat/deepbeat.h"

namespace {

using json = nlohmann::ordered_json;

struct Failure {
  std::string message;
};

void check(dbt_status s, const std::string& what) {
  if (s != DBT_OK) throw Failure{what + ": " + dbt_status_name(s) + ": " + dbt_last_error()};
}

struct Text {
  char* p = nullptr;
  ~Text() { dbt_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Dataset = Handle<dbt_dataset, dbt_dataset_free>;
using Model = Handle<dbt_model, dbt_model_free>;
using Forest = Handle<dbt_forest, dbt_forest_free>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{"cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve_out(const std::string& out) {
  if (!out.empty()) return out;
  Text t;
  check(dbt_default_out_dir(&t.p), "output directory");
  return t.str();
}

void record(const std::string& dir, const std::string& command, std::uint64_t seed, const json& config) {
  check(dbt_write_run_record(dir.c_str(), command.c_str(), seed, config.dump().c_str()), "run record");
}

void write(const std::string& dir, const std::string& name, const std::string& text) {
  check(dbt_write_text(dir.c_str(), name.c_str(), text.c_str()), "writing " + name);
}

const std::map<std::string, dbt_profile> kProfiles{{"paper", DBT_PROFILE_PAPER}, {"mini", DBT_PROFILE_MINI}};
const std::map<std::string, dbt_partition> kPartitions{{"train", DBT_TRAIN}, {"val", DBT_VAL}, {"test", DBT_TEST}};

dbt_model_kind checkpoint_kind(const std::string& dir) {
  dbt_model_kind k{};
  check(dbt_checkpoint_kind(dir.c_str(), &k), "checkpoint " + dir);
  return k;
}

void load_dataset(Dataset& ds, const std::string& dir) { check(dbt_dataset_load(dir.c_str(), &ds.p), "dataset " + dir); }
void load_model(Model& m, const std::string& dir) { check(dbt_model_load(dir.c_str(), &m.p), "checkpoint " + dir); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepBeat: PPG rhythm and signal-quality networks on simulated data"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::Range(1, 256));

  const auto profile_opt = [](CLI::App* c, std::string& v) {
    c->add_option("--profile", v, "network size")->check(CLI::IsMember({"paper", "mini"}));
  };
  const auto partition_opt = [](CLI::App* c, std::string& v) {
    c->add_option("--partition", v, "dataset partition")->check(CLI::IsMember({"train", "val", "test"}));
  };

  // simulate
  std::string sim_recipe, sim_out;
  auto* sim = app.add_subcommand("simulate", "simulate a labelled dataset from a recipe");
  sim->add_option("--recipe", sim_recipe, "recipe file (key = value lines)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "dataset directory");

  // pretrain-cdae
  std::string pc_data, pc_out, pc_profile = "mini";
  dbt_pretrain_config pc{};
  dbt_pretrain_config_init(&pc);
  auto* pre = app.add_subcommand("pretrain-cdae", "pretrain the convolutional denoising autoencoder");
  pre->add_option("--data", pc_data, "dataset directory")->required();
  pre->add_option("--out", pc_out, "checkpoint directory");
  profile_opt(pre, pc_profile);
  pre->add_option("--epochs", pc.epochs, "training epochs")->check(CLI::PositiveNumber);
  pre->add_option("--batch-size", pc.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  pre->add_option("--lr", pc.lr, "initial learning rate")->check(CLI::PositiveNumber);
  pre->add_option("--patience", pc.patience, "epochs without improvement before the rate drops");
  pre->add_option("--seed", pc.seed, "initialization and shuffling seed");

  // train-deepbeat
  std::string tr_data, tr_out, tr_encoder, tr_profile = "mini";
  bool tr_no_pretrain = false, tr_single = false;
  double tr_dropout = 0.2;
  dbt_train_config tc{};
  dbt_train_config_init(&tc);
  auto* tr = app.add_subcommand("train-deepbeat", "train the multi-task rhythm and quality network");
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "checkpoint directory");
  auto* enc = tr->add_option("--encoder", tr_encoder, "pretrained autoencoder checkpoint");
  auto* nop = tr->add_flag("--no-pretrain", tr_no_pretrain, "start from random initialization");
  enc->excludes(nop);
  profile_opt(tr, tr_profile);
  tr->add_flag("--single-task", tr_single, "train the rhythm task alone");
  auto* lam = tr->add_option("--lambda-qa", tc.lambda_qa, "weight of the quality loss")->check(CLI::NonNegativeNumber);
  tr->add_option("--epochs", tc.epochs, "training epochs")->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", tc.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  tr->add_option("--lr", tc.lr, "learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--dropout", tr_dropout, "dropout rate of every dropout layer")->check(CLI::Range(0.0, 0.95));
  tr->add_option("--seed", tc.seed, "initialization, dropout and shuffling seed");

  // train-baseline
  std::string bl_data, bl_out;
  dbt_forest_config fc{};
  dbt_forest_config_init(&fc);
  auto* bl = app.add_subcommand("train-baseline", "fit the random-forest baseline on hand-crafted features");
  bl->add_option("--data", bl_data, "dataset directory")->required();
  bl->add_option("--out", bl_out, "checkpoint directory");
  bl->add_option("--trees", fc.n_estimators, "number of trees")->check(CLI::PositiveNumber);
  bl->add_option("--max-features", fc.max_features, "features tried per split (0: sqrt)");
  bl->add_option("--seed", fc.seed, "bootstrap and feature sampling seed");

  // evaluate
  std::string ev_model, ev_data, ev_out, ev_partition = "test", ev_gate = "excellent";
  dbt_eval_options eo{};
  dbt_eval_options_init(&eo);
  bool ev_episodes = false, ev_fpr = false;
  auto* ev = app.add_subcommand("evaluate", "compute the metrics report of a trained model");
  ev->add_option("--model", ev_model, "DeepBeat or forest checkpoint")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--out", ev_out, "report directory");
  partition_opt(ev, ev_partition);
  ev->add_option("--qa-gate", ev_gate, "keep only windows predicted at this quality")
      ->check(CLI::IsMember({"excellent", "acceptable", "poor", "none"}));
  ev->add_option("--threshold", eo.threshold, "AF when P(AF) >= threshold")->check(CLI::Range(0.0, 1.0));
  ev->add_flag("--episodes", ev_episodes, "report episode sensitivity");
  ev->add_flag("--fpr", ev_fpr, "report the false-positive rate on AF-free subjects");

  // saliency
  std::string sa_model, sa_data, sa_out, sa_partition = "test", sa_class = "af", sa_layer = "rhythm";
  std::size_t sa_max = 0;
  auto* sa = app.add_subcommand("saliency", "class-activation maps over the 800 input samples");
  sa->add_option("--model", sa_model, "DeepBeat checkpoint")->required();
  sa->add_option("--data", sa_data, "dataset directory")->required();
  sa->add_option("--out", sa_out, "output directory");
  partition_opt(sa, sa_partition);
  sa->add_option("--class", sa_class, "target rhythm")->check(CLI::IsMember({"af", "sinus"}));
  sa->add_option("--layer", sa_layer, "feature map to explain")->check(CLI::IsMember({"rhythm", "shared", "encoder"}));
  sa->add_option("--max-windows", sa_max, "limit on windows (0: all)");

  // embeddings
  std::string em_model, em_data, em_out, em_partition = "test";
  auto* em = app.add_subcommand("embeddings", "export rhythm-branch embeddings");
  em->add_option("--model", em_model, "DeepBeat checkpoint")->required();
  em->add_option("--data", em_data, "dataset directory")->required();
  em->add_option("--out", em_out, "output directory");
  partition_opt(em, em_partition);

  // inspect
  std::string in_model, in_profile = "paper", in_checkpoint, in_out;
  auto* ins = app.add_subcommand("inspect", "print a layer table with output shapes and parameter counts");
  auto* in_m = ins->add_option("--model", in_model, "architecture")->check(CLI::IsMember({"cdae", "deepbeat"}));
  profile_opt(ins, in_profile);
  auto* in_c = ins->add_option("--checkpoint", in_checkpoint, "checkpoint directory");
  in_m->excludes(in_c);
  ins->add_option("--out", in_out, "directory for the run record");

  try {
    app.parse(argc, argv);
    if (ins->parsed() && in_model.empty() && in_checkpoint.empty())
      throw CLI::RequiredError("inspect needs --model or --checkpoint");
    if (tr->parsed() && tr_single && lam->count() > 0)
      throw CLI::ExcludesError("--single-task", "--lambda-qa");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    check(dbt_set_num_threads(threads), "threads");

    if (sim->parsed()) {
      const std::string recipe = read_text(sim_recipe);
      Dataset ds;
      check(dbt_dataset_simulate(recipe.c_str(), &ds.p), "simulate");
      const std::string out = resolve_out(sim_out);
      check(dbt_dataset_save(ds.p, out.c_str()), "saving dataset");
      record(out, "simulate", dbt_dataset_seed(ds.p), json{{"recipe", recipe}});
      std::cout << "wrote " << dbt_dataset_count(ds.p) << " windows to " << out << "\n";
    } else if (pre->parsed()) {
      Dataset ds;
      load_dataset(ds, pc_data);
      Model m;
      check(dbt_cdae_build(kProfiles.at(pc_profile), pc.seed, &m.p), "building autoencoder");
      Text hist;
      check(dbt_cdae_pretrain(m.p, ds.p, &pc, &hist.p), "pretraining");
      const json cfg{{"data", pc_data},         {"profile", pc_profile},   {"epochs", pc.epochs},
                     {"batch_size", pc.batch_size}, {"lr", pc.lr},        {"patience", pc.patience},
                     {"lr_factor", pc.lr_factor}, {"min_lr", pc.min_lr}, {"seed", pc.seed}};
      const std::string out = resolve_out(pc_out);
      check(dbt_model_save(m.p, out.c_str(), cfg.dump().c_str()), "saving checkpoint");
      write(out, "history.tsv", hist.str());
      record(out, "pretrain-cdae", pc.seed, cfg);
      std::cout << "saved autoencoder to " << out << "\n";
    } else if (tr->parsed()) {
      if (tr_encoder.empty() && !tr_no_pretrain)
        throw Failure{"train-deepbeat needs --encoder <checkpoint> or --no-pretrain"};
      if (tr_single) tc.lambda_qa = 0.0;
      Dataset ds;
      load_dataset(ds, tr_data);
      Model encoder;
      if (!tr_encoder.empty()) {
        if (checkpoint_kind(tr_encoder) != DBT_MODEL_CDAE) throw Failure{"--encoder must name an autoencoder checkpoint"};
        load_model(encoder, tr_encoder);
      }
      Model m;
      check(dbt_deepbeat_build_dropout(kProfiles.at(tr_profile), tc.seed, encoder.p, tr_dropout, &m.p),
            "building network");
      Text hist;
      check(dbt_deepbeat_train(m.p, ds.p, &tc, &hist.p), "training");
      const json cfg{{"data", tr_data},
                     {"encoder", tr_encoder.empty() ? json(nullptr) : json(tr_encoder)},
                     {"profile", tr_profile},
                     {"mode", std::string(tr_single ? "single-task" : "multi-task") +
                                  (tr_encoder.empty() ? "/random-init" : "/pretrained")},
                     {"epochs", tc.epochs},
                     {"batch_size", tc.batch_size},
                     {"lr", tc.lr},
                     {"dropout", tr_dropout},
                     {"lambda_qa", tc.lambda_qa},
                     {"seed", tc.seed}};
      const std::string out = resolve_out(tr_out);
      check(dbt_model_save(m.p, out.c_str(), cfg.dump().c_str()), "saving checkpoint");
      write(out, "history.tsv", hist.str());
      record(out, "train-deepbeat", tc.seed, cfg);
      std::cout << "saved DeepBeat network to " << out << "\n";
    } else if (bl->parsed()) {
      Dataset ds;
      load_dataset(ds, bl_data);
      Forest f;
      check(dbt_forest_train(ds.p, &fc, &f.p), "training forest");
      const json cfg{{"data", bl_data},
                     {"trees", fc.n_estimators},
                     {"max_features", fc.max_features},
                     {"bootstrap", fc.bootstrap != 0},
                     {"seed", fc.seed}};
      const std::string out = resolve_out(bl_out);
      check(dbt_forest_save(f.p, out.c_str(), cfg.dump().c_str()), "saving forest");
      record(out, "train-baseline", fc.seed, cfg);
      std::cout << "saved forest to " << out << "\n";
    } else if (ev->parsed()) {
      eo.partition = kPartitions.at(ev_partition);
      const std::map<std::string, int> gates{{"none", -1}, {"excellent", DBT_EXCELLENT},
                                             {"acceptable", DBT_ACCEPTABLE}, {"poor", DBT_POOR}};
      eo.gate = gates.at(ev_gate);
      eo.episodes = ev_episodes;
      eo.fpr = ev_fpr;
      Dataset ds;
      load_dataset(ds, ev_data);
      Text report, curve;
      if (checkpoint_kind(ev_model) == DBT_MODEL_FOREST) {
        Forest f;
        check(dbt_forest_load(ev_model.c_str(), &f.p), "checkpoint " + ev_model);
        check(dbt_evaluate_forest(f.p, ds.p, &eo, &report.p, &curve.p), "evaluating");
      } else {
        Model m;
        load_model(m, ev_model);
        check(dbt_evaluate_model(m.p, ds.p, &eo, &report.p, &curve.p), "evaluating");
      }
      const json cfg{{"model", ev_model},        {"data", ev_data},        {"partition", ev_partition},
                     {"qa_gate", ev_gate},       {"threshold", eo.threshold}, {"episodes", ev_episodes},
                     {"fpr", ev_fpr}};
      const std::string out = resolve_out(ev_out);
      write(out, "metrics.json", report.str());
      write(out, "pr_curve.tsv", curve.str());
      record(out, "evaluate", 0, cfg);
      std::cout << report.str();
    } else if (sa->parsed()) {
      Dataset ds;
      load_dataset(ds, sa_data);
      Model m;
      load_model(m, sa_model);
      const std::map<std::string, dbt_saliency_layer> layers{
          {"rhythm", DBT_SALIENCY_RHYTHM}, {"shared", DBT_SALIENCY_SHARED}, {"encoder", DBT_SALIENCY_ENCODER}};
      Text tsv;
      check(dbt_saliency_table(m.p, ds.p, kPartitions.at(sa_partition), sa_class == "af" ? DBT_AF : DBT_SINUS,
                               layers.at(sa_layer), sa_max, &tsv.p),
            "saliency");
      const json cfg{{"model", sa_model}, {"data", sa_data},   {"partition", sa_partition},
                     {"class", sa_class}, {"layer", sa_layer}, {"max_windows", sa_max}};
      const std::string out = resolve_out(sa_out);
      write(out, "saliency.tsv", tsv.str());
      record(out, "saliency", 0, cfg);
      std::cout << "wrote " << out << "/saliency.tsv\n";
    } else if (em->parsed()) {
      Dataset ds;
      load_dataset(ds, em_data);
      Model m;
      load_model(m, em_model);
      Text tsv;
      check(dbt_embeddings_table(m.p, ds.p, kPartitions.at(em_partition), &tsv.p), "embeddings");
      const json cfg{{"model", em_model}, {"data", em_data}, {"partition", em_partition}};
      const std::string out = resolve_out(em_out);
      write(out, "embeddings.tsv", tsv.str());
      record(out, "embeddings", 0, cfg);
      std::cout << "wrote " << out << "/embeddings.tsv\n";
    } else if (ins->parsed()) {
      Text table;
      json cfg;
      if (!in_checkpoint.empty()) {
        if (checkpoint_kind(in_checkpoint) == DBT_MODEL_FOREST) throw Failure{"forests have no layer table"};
        Model m;
        load_model(m, in_checkpoint);
        check(dbt_model_layer_table(m.p, &table.p), "layer table");
        cfg = {{"checkpoint", in_checkpoint}};
      } else {
        const auto kind = in_model == "cdae" ? DBT_MODEL_CDAE : DBT_MODEL_DEEPBEAT;
        check(dbt_layer_table(kind, kProfiles.at(in_profile), &table.p), "layer table");
        cfg = {{"model", in_model}, {"profile", in_profile}};
      }
      std::cout << table.str();
      record(resolve_out(in_out), "inspect", 0, cfg);
    }
  } catch (const Failure& f) {
    std::cerr << "deepbeat: error: " << f.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "deepbeat: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
