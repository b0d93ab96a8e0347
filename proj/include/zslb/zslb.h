/* zslb: zero-shot learning benchmark toolkit, C interface.
 *
 * Objects are opaque handles created by *_load / *_synthesize / zslb_train
 * and released with the matching *_free. Every fallible call returns a
 * zslb_status; on failure zslb_last_error() holds a message for the calling
 * thread until its next failing call.
 */
#ifndef ZSLB_H
#define ZSLB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ZSLB_BUILDING)
#    define ZSLB_API __declspec(dllexport)
#  else
#    define ZSLB_API __declspec(dllimport)
#  endif
#else
#  define ZSLB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum zslb_status {
  ZSLB_OK = 0,
  ZSLB_INVALID_ARGUMENT = 1,
  ZSLB_DIMENSION_MISMATCH = 2,
  ZSLB_MALFORMED_BUNDLE = 3,
  ZSLB_CORRUPT_PAYLOAD = 4,
  ZSLB_INVALID_DATASET = 5,
  ZSLB_IO_ERROR = 6,
  ZSLB_DIVERGED = 7,
  ZSLB_SINGULAR_SYSTEM = 8,
  ZSLB_SPECTRAL_CONFLICT = 9,
  ZSLB_DEGENERATE_META_SPLIT = 10,
  ZSLB_NO_CONSENSUS = 11,
  ZSLB_INCOMPLETE_TABLE = 12,
  ZSLB_INTERNAL_ERROR = 100
} zslb_status;

typedef struct zslb_dataset zslb_dataset;
typedef struct zslb_model zslb_model;
typedef struct zslb_violations zslb_violations;
typedef struct zslb_analysis zslb_analysis;

ZSLB_API const char* zslb_version(void);
ZSLB_API const char* zslb_last_error(void);
ZSLB_API const char* zslb_status_string(zslb_status status);

/* Strings returned through char** out-parameters. */
ZSLB_API void zslb_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

typedef struct zslb_synth_spec {
  size_t n_seen;
  size_t n_unseen;
  size_t per_class;
  size_t feature_dim;
  size_t semantic_dim;
  double noise_sigma;
  uint64_t seed;
} zslb_synth_spec;

typedef struct zslb_dataset_info {
  size_t instances;
  size_t feature_dim;
  size_t semantic_dim;
  size_t seen_classes;
  size_t unseen_classes;
  size_t train_rows;
  size_t test_rows;
  int has_attributes;
} zslb_dataset_info;

ZSLB_API void zslb_synth_spec_default(zslb_synth_spec* spec);
ZSLB_API zslb_status zslb_dataset_synthesize(const zslb_synth_spec* spec, zslb_dataset** out);
/* Fails with ZSLB_INVALID_DATASET (violations in zslb_last_error, one per
 * line) when the bundle breaks an invariant. */
ZSLB_API zslb_status zslb_dataset_load(const char* dir, zslb_dataset** out);
ZSLB_API zslb_status zslb_dataset_save(const zslb_dataset* ds, const char* dir);
ZSLB_API zslb_status zslb_dataset_info_get(const zslb_dataset* ds, zslb_dataset_info* out);
ZSLB_API const char* zslb_dataset_name(const zslb_dataset* ds);
ZSLB_API void zslb_dataset_free(zslb_dataset* ds);

ZSLB_API zslb_status zslb_dataset_validate(const zslb_dataset* ds, zslb_violations** out);
ZSLB_API size_t zslb_violations_count(const zslb_violations* v);
ZSLB_API const char* zslb_violations_get(const zslb_violations* v, size_t i);
ZSLB_API void zslb_violations_free(zslb_violations* v);

/* ---- classifiers ------------------------------------------------------- */

typedef enum zslb_label_coding { ZSLB_CODING_ZERO_ONE = 0, ZSLB_CODING_PLUS_MINUS_ONE = 1 } zslb_label_coding;

typedef struct zslb_train_config {
  double learning_rate;
  double margin;
  size_t epochs;
  size_t patience;
  double gamma;
  double lambda;
  int normalize_inputs;
  uint64_t seed;
  int label_coding; /* zslb_label_coding */
  int sae_feature_space;
} zslb_train_config;

typedef struct zslb_model_info {
  size_t feature_dim;
  size_t semantic_dim;
  size_t epochs_run;
  int stopped_early;
  uint64_t seed;
} zslb_model_info;

typedef struct zslb_metrics {
  double top1;
  double top5;
  double logloss;
  double f1;
  size_t f1_absent_classes;
} zslb_metrics;

/* method: DeViSE, ALE, SJE, ESZSL or SAE (case-insensitive). */
ZSLB_API zslb_status zslb_default_config(const char* method, zslb_train_config* out);
ZSLB_API zslb_status zslb_train(const zslb_dataset* train, const char* method, const zslb_train_config* cfg,
                                zslb_model** out);
ZSLB_API zslb_status zslb_model_save(const zslb_model* model, const char* path);
ZSLB_API zslb_status zslb_model_load(const char* path, zslb_model** out);
ZSLB_API const char* zslb_model_method(const zslb_model* model);
ZSLB_API zslb_status zslb_model_info_get(const zslb_model* model, zslb_model_info* out);
ZSLB_API zslb_status zslb_model_config(const zslb_model* model, zslb_train_config* out);
ZSLB_API void zslb_model_free(zslb_model* model);

/* Metrics of the model on the dataset's unseen-class test rows. */
ZSLB_API zslb_status zslb_evaluate(const zslb_model* model, const zslb_dataset* ds, zslb_metrics* out);
/* Test-row predictions; `labels` needs room for info.test_rows entries. */
ZSLB_API zslb_status zslb_predict_test(const zslb_model* model, const zslb_dataset* ds, int32_t* labels,
                                       size_t capacity);

/* ---- fusion and analysis ----------------------------------------------- */

typedef struct zslb_fusion_config {
  double fusion_class_fraction;
  size_t mdt_max_depth;
  size_t mdt_min_leaf;
  size_t dnn_hidden1;
  size_t dnn_hidden2;
  double dnn_learning_rate;
  size_t dnn_epochs;
  size_t gt_rounds;
  double gt_eta;
  double con_tolerance;
  size_t con_max_iters;
  uint64_t seed;
} zslb_fusion_config;

typedef struct zslb_fusion_result {
  double top1;
  double f1;
  double ceiling;
} zslb_fusion_result;

ZSLB_API void zslb_fusion_config_default(zslb_fusion_config* cfg);
/* Fuses k models on the dataset's test rows with scheme MV, MDT, DNN, GT,
 * Con or Auc. Parametric schemes retrain each model's method (with its stored
 * config) on the carved pseudo-unseen split. `save_path` may be NULL. */
ZSLB_API zslb_status zslb_fuse(const zslb_dataset* ds, const zslb_model* const* models, size_t k,
                               const char* scheme, const zslb_fusion_config* cfg, const char* save_path,
                               zslb_fusion_result* out);

ZSLB_API zslb_status zslb_analyze(const zslb_dataset* ds, const zslb_model* const* models, size_t k,
                                  zslb_analysis** out);
ZSLB_API size_t zslb_analysis_level_count(const zslb_analysis* a);
ZSLB_API double zslb_analysis_level(const zslb_analysis* a, size_t level);
ZSLB_API double zslb_analysis_ceiling(const zslb_analysis* a);
/* NULL when the dataset has no attributes; "undefined" when no instance
 * qualifies. */
ZSLB_API const char* zslb_analysis_easiest(const zslb_analysis* a);
ZSLB_API const char* zslb_analysis_hardest(const zslb_analysis* a);
ZSLB_API void zslb_analysis_free(zslb_analysis* a);

/* Dense-rank points. values[(m * n_datasets + d) * n_competitors + c];
 * NaN marks a missing cell (ZSLB_INCOMPLETE_TABLE). lower_better has one flag
 * per measure. points is n_competitors x n_datasets, totals n_competitors. */
ZSLB_API zslb_status zslb_combined_points(const double* values, size_t n_measures, size_t n_datasets,
                                          size_t n_competitors, const int* lower_better, int* points, int* totals);
/* Points CSV from metric table files; a table whose file stem appears in
 * lower_better is ranked ascending. */
ZSLB_API zslb_status zslb_points_from_csv(const char* const* paths, size_t n_paths, const char* const* lower_better,
                                          size_t n_lower, char** csv_out);

/* ---- harness ----------------------------------------------------------- */

/* out_dir overrides the config's `out`; either must be set. */
ZSLB_API zslb_status zslb_run_experiment(const char* config_path, const char* out_dir, size_t* n_records,
                                         size_t* n_failed);
/* Rebuilds report files from <records_dir>/records.ndtxt. */
ZSLB_API zslb_status zslb_emit_report(const char* records_dir, const char* kind, const char* out_dir,
                                      size_t* warnings);

#ifdef __cplusplus
}
#endif

#endif /* ZSLB_H */
