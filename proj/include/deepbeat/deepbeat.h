/* deepbeat C API: opaque handles, status codes, caller-owned buffers.
 *
 * Every function returning dbt_status leaves a thread-local message for
 * dbt_last_error() on failure. Strings returned through char** are owned by
 * the caller and released with dbt_string_free(). */
#ifndef DEEPBEAT_DEEPBEAT_H
#define DEEPBEAT_DEEPBEAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DBT_API
#elif defined(DBT_BUILDING_LIBRARY)
#define DBT_API __attribute__((visibility("default")))
#else
#define DBT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dbt_status {
  DBT_OK = 0,
  DBT_ERR_INVALID_ARGUMENT = 1,
  DBT_ERR_CONFIG = 2,
  DBT_ERR_DOMAIN = 3,
  DBT_ERR_SHAPE = 4,
  DBT_ERR_NUMERIC = 5,
  DBT_ERR_DATA = 6,
  DBT_ERR_STATE = 7,
  DBT_ERR_UNDEFINED_METRIC = 8,
  DBT_ERR_IO = 9,
  DBT_ERR_FORMAT = 10,
  DBT_ERR_INTERNAL = 11
} dbt_status;

typedef enum dbt_profile { DBT_PROFILE_PAPER = 0, DBT_PROFILE_MINI = 1 } dbt_profile;
typedef enum dbt_model_kind { DBT_MODEL_CDAE = 0, DBT_MODEL_DEEPBEAT = 1, DBT_MODEL_FOREST = 2 } dbt_model_kind;
typedef enum dbt_partition { DBT_TRAIN = 0, DBT_VAL = 1, DBT_TEST = 2 } dbt_partition;
typedef enum dbt_rhythm { DBT_SINUS = 0, DBT_AF = 1 } dbt_rhythm;
typedef enum dbt_quality { DBT_EXCELLENT = 0, DBT_ACCEPTABLE = 1, DBT_POOR = 2 } dbt_quality;
typedef enum dbt_saliency_layer { DBT_SALIENCY_RHYTHM = 0, DBT_SALIENCY_SHARED = 1, DBT_SALIENCY_ENCODER = 2 } dbt_saliency_layer;

#define DBT_WINDOW_LENGTH 800

typedef struct dbt_dataset dbt_dataset;
typedef struct dbt_model dbt_model; /* autoencoder or DeepBeat network */
typedef struct dbt_forest dbt_forest;

DBT_API const char* dbt_version(void);
DBT_API const char* dbt_last_error(void);
DBT_API const char* dbt_status_name(dbt_status status);
DBT_API void dbt_string_free(char* s);
/* Worker threads for data-parallel loops; results do not depend on it. */
DBT_API dbt_status dbt_set_num_threads(int n);

/* ---- datasets ---- */
DBT_API dbt_status dbt_dataset_simulate(const char* recipe_text, dbt_dataset** out);
DBT_API dbt_status dbt_dataset_load(const char* dir, dbt_dataset** out);
DBT_API dbt_status dbt_dataset_save(const dbt_dataset* ds, const char* dir);
DBT_API void dbt_dataset_free(dbt_dataset* ds);
DBT_API size_t dbt_dataset_count(const dbt_dataset* ds);
/* Seed the dataset was simulated with. */
DBT_API uint64_t dbt_dataset_seed(const dbt_dataset* ds);
/* Copies window i (DBT_WINDOW_LENGTH floats) into out. */
DBT_API dbt_status dbt_dataset_window(const dbt_dataset* ds, size_t i, float* out);

typedef struct dbt_window_label {
  const char* window_id;  /* valid while the dataset lives */
  const char* subject_id;
  const char* episode_id;
  dbt_partition partition;
  dbt_rhythm rhythm;
  dbt_quality qa;
  double noise_factor;
} dbt_window_label;

DBT_API dbt_status dbt_dataset_label(const dbt_dataset* ds, size_t i, dbt_window_label* out);

/* ---- networks ---- */
DBT_API dbt_status dbt_cdae_build(dbt_profile profile, uint64_t seed, dbt_model** out);
/* encoder_source may be NULL (random initialization) or an autoencoder. */
DBT_API dbt_status dbt_deepbeat_build(dbt_profile profile, uint64_t seed, const dbt_model* encoder_source,
                                      dbt_model** out);
/* As above with an explicit dropout rate (default 0.2) for every dropout layer. */
DBT_API dbt_status dbt_deepbeat_build_dropout(dbt_profile profile, uint64_t seed, const dbt_model* encoder_source,
                                              double dropout, dbt_model** out);
DBT_API dbt_status dbt_model_load(const char* dir, dbt_model** out);
/* training_json: JSON object stored in the manifest, or NULL. */
DBT_API dbt_status dbt_model_save(const dbt_model* m, const char* dir, const char* training_json);
DBT_API void dbt_model_free(dbt_model* m);
DBT_API dbt_status dbt_model_kind_of(const dbt_model* m, dbt_model_kind* out);
DBT_API dbt_status dbt_model_parameter_count(const dbt_model* m, size_t* out);
/* Layer table of a built or loaded network. */
DBT_API dbt_status dbt_model_layer_table(const dbt_model* m, char** out);
/* Layer table from the architecture alone; allocates no weights. */
DBT_API dbt_status dbt_layer_table(dbt_model_kind kind, dbt_profile profile, char** out);
DBT_API dbt_status dbt_checkpoint_kind(const char* dir, dbt_model_kind* out);

typedef struct dbt_pretrain_config {
  size_t epochs;
  size_t batch_size;
  double lr;
  size_t patience;
  double lr_factor;
  double min_lr;
  uint64_t seed;
} dbt_pretrain_config;

DBT_API void dbt_pretrain_config_init(dbt_pretrain_config* cfg);
/* Trains on the train partition's (noisy, clean) pairs, validates on val.
 * history_tsv may be NULL. */
DBT_API dbt_status dbt_cdae_pretrain(dbt_model* cdae, const dbt_dataset* ds, const dbt_pretrain_config* cfg,
                                     char** history_tsv);
/* Mean squared reconstruction error per window of a partition, written to
 * out (length = number of windows in the partition, query with out = NULL). */
DBT_API dbt_status dbt_cdae_reconstruction_mse(dbt_model* cdae, const dbt_dataset* ds, dbt_partition p,
                                               double* out, size_t* count);

typedef struct dbt_train_config {
  size_t epochs;
  size_t batch_size;
  double lr;
  double lambda_qa; /* 0 trains the rhythm task alone */
  uint64_t seed;
} dbt_train_config;

DBT_API void dbt_train_config_init(dbt_train_config* cfg);
DBT_API dbt_status dbt_deepbeat_train(dbt_model* m, const dbt_dataset* ds, const dbt_train_config* cfg,
                                      char** history_tsv);

typedef struct dbt_prediction {
  double rhythm[2]; /* P(sinus), P(AF) */
  double qa[3];     /* P(excellent), P(acceptable), P(poor) */
} dbt_prediction;

DBT_API dbt_status dbt_deepbeat_infer(dbt_model* m, const float* windows, size_t count, dbt_prediction* out);

/* ---- random-forest baseline ---- */
typedef struct dbt_forest_config {
  size_t n_estimators;
  uint64_t seed;
  size_t max_features; /* 0: floor(sqrt(features)) */
  int bootstrap;
} dbt_forest_config;

DBT_API void dbt_forest_config_init(dbt_forest_config* cfg);
DBT_API dbt_status dbt_forest_train(const dbt_dataset* ds, const dbt_forest_config* cfg, dbt_forest** out);
DBT_API dbt_status dbt_forest_save(const dbt_forest* f, const char* dir, const char* training_json);
DBT_API dbt_status dbt_forest_load(const char* dir, dbt_forest** out);
DBT_API void dbt_forest_free(dbt_forest* f);
DBT_API dbt_status dbt_forest_predict(const dbt_forest* f, const float* windows, size_t count, dbt_prediction* out);

/* ---- evaluation ---- */
typedef struct dbt_eval_options {
  dbt_partition partition;
  double threshold; /* AF when P(AF) >= threshold */
  int gate;         /* -1: no gating, else a dbt_quality level */
  int episodes;     /* report episode sensitivity */
  int fpr;          /* report false-positive rate on AF-free subjects */
} dbt_eval_options;

DBT_API void dbt_eval_options_init(dbt_eval_options* opt);
/* report_json and pr_curve_tsv may each be NULL. */
DBT_API dbt_status dbt_evaluate_model(dbt_model* m, const dbt_dataset* ds, const dbt_eval_options* opt,
                                      char** report_json, char** pr_curve_tsv);
DBT_API dbt_status dbt_evaluate_forest(const dbt_forest* f, const dbt_dataset* ds, const dbt_eval_options* opt,
                                       char** report_json, char** pr_curve_tsv);

/* ---- interpretation ---- */
/* 800 scores in [0, 1] for one window. */
DBT_API dbt_status dbt_saliency(dbt_model* m, const float* window, dbt_rhythm target, dbt_saliency_layer layer,
                                double* out);
/* Rows "window_id  s0 .. s799" for up to max_windows windows of a partition
 * (0: all). */
DBT_API dbt_status dbt_saliency_table(dbt_model* m, const dbt_dataset* ds, dbt_partition p, dbt_rhythm target,
                                      dbt_saliency_layer layer, size_t max_windows, char** out_tsv);
/* Rows "window_id  rhythm  e0 .. e(k-1)" of rhythm-branch embeddings. */
DBT_API dbt_status dbt_embeddings_table(dbt_model* m, const dbt_dataset* ds, dbt_partition p, char** out_tsv);

/* ---- run bookkeeping ---- */
DBT_API dbt_status dbt_write_run_record(const char* dir, const char* command, uint64_t seed, const char* config_json);
DBT_API dbt_status dbt_config_digest(const char* text, char** out);
/* DEEPBEAT_OUT_DIR or "." */
DBT_API dbt_status dbt_default_out_dir(char** out);
/* Writes text to dir/name atomically, creating dir. */
DBT_API dbt_status dbt_write_text(const char* dir, const char* name, const char* text);

#ifdef __cplusplus
}
#endif

#endif /* DEEPBEAT_DEEPBEAT_H */
