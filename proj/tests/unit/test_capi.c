/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "deepbeat/deepbeat.h"

static int failures = 0;

#define EXPECT(cond)                                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

#define OK(call)                                                                   \
  do {                                                                             \
    dbt_status s_ = (call);                                                        \
    if (s_ != DBT_OK) {                                                            \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call,          \
              dbt_status_name(s_), dbt_last_error());                              \
      ++failures;                                                                  \
    }                                                                              \
  } while (0)

static char work[2048];

static const char* path(const char* leaf) {
  static char buf[8][4096];
  static int slot = 0;
  char* p = buf[slot++ % 8];
  snprintf(p, 4096, "%s/%s", work, leaf);
  return p;
}

static void test_errors(void) {
  dbt_dataset* ds = NULL;
  EXPECT(dbt_dataset_simulate(NULL, &ds) == DBT_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(dbt_last_error()) > 0);
  EXPECT(dbt_dataset_simulate("bogus_key = 1\n", &ds) == DBT_ERR_CONFIG);
  EXPECT(strstr(dbt_last_error(), "bogus_key") != NULL);
  EXPECT(ds == NULL);
  EXPECT(dbt_dataset_load(path("does-not-exist"), &ds) == DBT_ERR_IO);
  EXPECT(strcmp(dbt_status_name(DBT_ERR_FORMAT), "format error") == 0);
  EXPECT(dbt_set_num_threads(0) == DBT_ERR_CONFIG);
  dbt_dataset_free(NULL);
  dbt_model_free(NULL);
  dbt_forest_free(NULL);
  dbt_string_free(NULL);
}

static void test_tables(void) {
  char* table = NULL;
  OK(dbt_layer_table(DBT_MODEL_DEEPBEAT, DBT_PROFILE_PAPER, &table));
  EXPECT(table != NULL && strstr(table, "352") != NULL);
  EXPECT(table != NULL && strstr(table, "Total params") != NULL);
  dbt_string_free(table);
  EXPECT(dbt_layer_table(DBT_MODEL_FOREST, DBT_PROFILE_PAPER, &table) == DBT_ERR_CONFIG);

  char* digest = NULL;
  OK(dbt_config_digest("", &digest));
  EXPECT(digest != NULL && strcmp(digest, "cbf29ce484222325") == 0);
  dbt_string_free(digest);
  EXPECT(strlen(dbt_version()) > 0);
}

static void test_pipeline(void) {
  dbt_dataset* ds = NULL;
  OK(dbt_dataset_simulate("train_count = 24\nval_count = 8\ntest_count = 12\nseed = 5\n", &ds));
  if (ds == NULL) return;
  const size_t n = dbt_dataset_count(ds);
  EXPECT(n > 0);
  EXPECT(dbt_dataset_seed(ds) == 5);

  OK(dbt_dataset_save(ds, path("ds")));
  dbt_dataset* again = NULL;
  OK(dbt_dataset_load(path("ds"), &again));
  EXPECT(again != NULL && dbt_dataset_count(again) == n);
  float a[DBT_WINDOW_LENGTH], b[DBT_WINDOW_LENGTH];
  OK(dbt_dataset_window(ds, n - 1, a));
  if (again != NULL) OK(dbt_dataset_window(again, n - 1, b));
  EXPECT(memcmp(a, b, sizeof a) == 0);
  EXPECT(dbt_dataset_window(ds, n, a) == DBT_ERR_SHAPE);
  dbt_window_label label;
  OK(dbt_dataset_label(ds, 0, &label));
  EXPECT(label.window_id != NULL && strlen(label.window_id) > 0);
  EXPECT(label.partition == DBT_TRAIN);
  dbt_dataset_free(again);

  dbt_model* cdae = NULL;
  OK(dbt_cdae_build(DBT_PROFILE_MINI, 2, &cdae));
  dbt_pretrain_config pc;
  dbt_pretrain_config_init(&pc);
  pc.epochs = 2;
  char* history = NULL;
  OK(dbt_cdae_pretrain(cdae, ds, &pc, &history));
  EXPECT(history != NULL && strncmp(history, "epoch", 5) == 0);
  dbt_string_free(history);
  size_t count = 0;
  OK(dbt_cdae_reconstruction_mse(cdae, ds, DBT_TEST, NULL, &count));
  EXPECT(count > 0);
  double* mse = malloc(count * sizeof *mse);
  OK(dbt_cdae_reconstruction_mse(cdae, ds, DBT_TEST, mse, &count));
  for (size_t i = 0; i < count; ++i) EXPECT(isfinite(mse[i]) && mse[i] >= 0.0);
  free(mse);

  dbt_model* net = NULL;
  OK(dbt_deepbeat_build(DBT_PROFILE_MINI, 3, cdae, &net));
  dbt_model_kind kind = DBT_MODEL_FOREST;
  if (net != NULL) OK(dbt_model_kind_of(net, &kind));
  EXPECT(kind == DBT_MODEL_DEEPBEAT);
  char* report = NULL;
  dbt_eval_options eo;
  dbt_eval_options_init(&eo);
  EXPECT(dbt_evaluate_model(cdae, ds, &eo, &report, NULL) == DBT_ERR_STATE);
  EXPECT(dbt_evaluate_model(net, NULL, &eo, &report, NULL) == DBT_ERR_INVALID_ARGUMENT);

  dbt_train_config tc;
  dbt_train_config_init(&tc);
  tc.epochs = 2;
  OK(dbt_deepbeat_train(net, ds, &tc, NULL));
  dbt_prediction p[2];
  OK(dbt_deepbeat_infer(net, a, 1, p));
  EXPECT(fabs(p[0].rhythm[0] + p[0].rhythm[1] - 1.0) < 1e-9);
  EXPECT(fabs(p[0].qa[0] + p[0].qa[1] + p[0].qa[2] - 1.0) < 1e-9);

  eo.gate = -1;
  char* curve = NULL;
  OK(dbt_evaluate_model(net, ds, &eo, &report, &curve));
  EXPECT(report != NULL && strstr(report, "\"auprc\"") != NULL);
  EXPECT(curve != NULL && strstr(curve, "threshold") != NULL);
  dbt_string_free(report);
  dbt_string_free(curve);

  double map[DBT_WINDOW_LENGTH];
  OK(dbt_saliency(net, a, DBT_AF, DBT_SALIENCY_SHARED, map));
  for (int i = 0; i < DBT_WINDOW_LENGTH; ++i) EXPECT(map[i] >= 0.0 && map[i] <= 1.0);
  char* tsv = NULL;
  OK(dbt_embeddings_table(net, ds, DBT_TEST, &tsv));
  EXPECT(tsv != NULL && strncmp(tsv, "window_id\trhythm\te0", 19) == 0);
  dbt_string_free(tsv);

  OK(dbt_model_save(net, path("net"), "{\"epochs\": 2}"));
  OK(dbt_checkpoint_kind(path("net"), &kind));
  EXPECT(kind == DBT_MODEL_DEEPBEAT);
  dbt_model* loaded = NULL;
  OK(dbt_model_load(path("net"), &loaded));
  dbt_prediction q[1];
  if (loaded != NULL) OK(dbt_deepbeat_infer(loaded, a, 1, q));
  EXPECT(memcmp(p, q, sizeof q) == 0);
  EXPECT(dbt_model_save(net, path("bad"), "not json") == DBT_ERR_CONFIG);
  dbt_model_free(loaded);

  dbt_forest_config fc;
  dbt_forest_config_init(&fc);
  fc.n_estimators = 5;
  dbt_forest* forest = NULL;
  OK(dbt_forest_train(ds, &fc, &forest));
  OK(dbt_forest_predict(forest, a, 1, p));
  OK(dbt_forest_save(forest, path("forest"), NULL));
  dbt_forest* f2 = NULL;
  OK(dbt_forest_load(path("forest"), &f2));
  if (f2 != NULL) OK(dbt_forest_predict(f2, a, 1, q));
  EXPECT(memcmp(p, q, sizeof q) == 0);
  EXPECT(dbt_model_load(path("forest"), &loaded) == DBT_ERR_FORMAT);
  dbt_forest_free(f2);
  dbt_forest_free(forest);

  OK(dbt_write_run_record(path("run"), "test", 5, "{}"));
  OK(dbt_write_text(path("run"), "note.txt", "hello\n"));

  dbt_model_free(net);
  dbt_model_free(cdae);
  dbt_dataset_free(ds);
}

int main(int argc, char** argv) {
  snprintf(work, sizeof work, "%s", argc > 1 ? argv[1] : "capi_work");
  test_errors();
  test_tables();
  test_pipeline();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
