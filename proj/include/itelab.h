#ifndef ITELAB_H
#define ITELAB_H

/* C interface to the planning corpus, toy model, trainer and evaluation
 * harness. Every function returns a status; on failure itelab_last_error()
 * holds a one-line message for the calling thread. Strings returned through
 * `char**` are owned by the caller and released with itelab_string_free. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ITELAB_API __declspec(dllexport)
#else
#define ITELAB_API __attribute__((visibility("default")))
#endif

typedef enum itelab_status {
  ITELAB_OK = 0,
  ITELAB_INVALID_ARGUMENT,
  ITELAB_ILLEGAL_ACTION,
  ITELAB_ILLEGAL_MOVE,
  ITELAB_MALFORMED_PATHWAY,
  ITELAB_BUCKET_INFEASIBLE,
  ITELAB_UNKNOWN_TOKEN,
  ITELAB_PARSE_ERROR,
  ITELAB_INSUFFICIENT_SAMPLES,
  ITELAB_EMPTY_INPUT,
  ITELAB_NO_CORRUPTION_POSSIBLE,
  ITELAB_CONTEXT_OVERFLOW,
  ITELAB_DIVERGENCE_DETECTED,
  ITELAB_INCONSISTENT_BUCKETS,
  ITELAB_INVALID_CONFIG,
  ITELAB_IO_ERROR,
  ITELAB_INTERNAL_ERROR
} itelab_status;

typedef struct itelab_config itelab_config;
typedef struct itelab_dataset itelab_dataset;
typedef struct itelab_model itelab_model;

ITELAB_API const char* itelab_status_name(itelab_status status);
ITELAB_API const char* itelab_last_error(void);
ITELAB_API void itelab_string_free(char* s);

/* Run configuration (key = value). Unknown keys are INVALID_CONFIG. */
ITELAB_API itelab_status itelab_config_new(itelab_config** out);
ITELAB_API void itelab_config_free(itelab_config* cfg);
ITELAB_API size_t itelab_config_key_count(void);
ITELAB_API const char* itelab_config_key(size_t index);
ITELAB_API itelab_status itelab_config_set(itelab_config* cfg, const char* key, const char* value);
ITELAB_API itelab_status itelab_config_get(const itelab_config* cfg, const char* key, char** out);
ITELAB_API itelab_status itelab_config_load(itelab_config* cfg, const char* path);
ITELAB_API itelab_status itelab_config_validate(const itelab_config* cfg);
ITELAB_API itelab_status itelab_config_render(const itelab_config* cfg, char** out);

/* Datasets: generation plus train.tsv / test.tsv / split.txt directories. */
ITELAB_API itelab_status itelab_gen(const itelab_config* cfg, itelab_dataset** out);
ITELAB_API itelab_status itelab_dataset_load(const char* dir, itelab_dataset** out);
ITELAB_API itelab_status itelab_dataset_save(const itelab_dataset* ds, const char* dir);
ITELAB_API size_t itelab_dataset_size(const itelab_dataset* ds, int test_side);
ITELAB_API void itelab_dataset_free(itelab_dataset* ds);

/* Trains on the dataset's training side. Checkpoints and the step log go
 * under run_dir (may be NULL). `summary` may be NULL. */
ITELAB_API itelab_status itelab_train(const itelab_config* cfg, const itelab_dataset* ds,
                                      const char* run_dir, itelab_model** out, char** summary);
/* A model directory holds model.ckpt and vocab.json. */
ITELAB_API itelab_status itelab_model_load(const char* dir, itelab_model** out);
ITELAB_API itelab_status itelab_model_save(const itelab_model* model, const char* dir);
ITELAB_API size_t itelab_model_vocab_size(const itelab_model* model);
ITELAB_API void itelab_model_free(itelab_model* model);

/* Reports over the dataset's test side, rendered in the configured format. */
ITELAB_API itelab_status itelab_eval(const itelab_config* cfg, const itelab_model* model,
                                     const itelab_dataset* ds, char** report);
ITELAB_API itelab_status itelab_bench(const itelab_config* cfg, const itelab_model* model,
                                      const itelab_dataset* ds, char** report);
ITELAB_API itelab_status itelab_audit(const itelab_config* cfg, const itelab_model* model,
                                      const itelab_dataset* ds, char** report);
/* One training run per grid point; per-point artifacts go under run_dir. */
ITELAB_API itelab_status itelab_ablate(const itelab_config* cfg, const itelab_dataset* ds,
                                       const char* run_dir, char** report);

#ifdef __cplusplus
}
#endif

#endif
