/* C interface to the few-shot text anomaly detection library. */
#ifndef FSAD_FSAD_H
#define FSAD_FSAD_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(FSAD_BUILDING_LIBRARY)
#    define FSAD_API __declspec(dllexport)
#  else
#    define FSAD_API __declspec(dllimport)
#  endif
#else
#  define FSAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsad_status {
  FSAD_OK = 0,
  FSAD_ERR_INVALID_ARGUMENT = 1,
  FSAD_ERR_CONFIG = 2,
  FSAD_ERR_IO = 3,
  FSAD_ERR_FORMAT = 4,
  FSAD_ERR_DATA = 5,
  FSAD_ERR_NUMERIC = 6,
  FSAD_ERR_INTERNAL = 7
} fsad_status;

typedef struct fsad_config fsad_config;
typedef struct fsad_report fsad_report;
typedef struct fsad_model fsad_model;

FSAD_API const char* fsad_version(void);
FSAD_API const char* fsad_status_string(fsad_status status);

/* Message of the last failed call on this thread ("" if none). */
FSAD_API const char* fsad_last_error(void);

/* Run configuration: flat key = value pairs, later sets win. */
FSAD_API fsad_status fsad_config_create(fsad_config** out);
FSAD_API void fsad_config_destroy(fsad_config* config);
FSAD_API fsad_status fsad_config_set(fsad_config* config, const char* key, const char* value);
FSAD_API fsad_status fsad_config_load_file(fsad_config* config, const char* path);
FSAD_API fsad_status fsad_config_validate(const fsad_config* config);

/* Commands. On success *out receives a report to release with
   fsad_report_destroy. */
FSAD_API fsad_status fsad_cmd_synth(const fsad_config* config, fsad_report** out);
FSAD_API fsad_status fsad_cmd_preprocess(const fsad_config* config, fsad_report** out);
FSAD_API fsad_status fsad_cmd_train(const fsad_config* config, fsad_report** out);
FSAD_API fsad_status fsad_cmd_eval(const fsad_config* config, fsad_report** out);
FSAD_API fsad_status fsad_cmd_ablate(const fsad_config* config, fsad_report** out);
FSAD_API fsad_status fsad_cmd_loo(const fsad_config* config, fsad_report** out);

/* Borrowed strings, valid until the report is destroyed. */
FSAD_API const char* fsad_report_json(const fsad_report* report);
FSAD_API const char* fsad_report_table(const fsad_report* report);
FSAD_API void fsad_report_destroy(fsad_report* report);

/* Checkpoint scoring. prototypical and maml checkpoints need fsad_model_fit
   on labeled examples of the target domain first. */
FSAD_API fsad_status fsad_model_load(const char* path, fsad_model** out);
FSAD_API void fsad_model_destroy(fsad_model* model);
FSAD_API const char* fsad_model_method(const fsad_model* model);
FSAD_API fsad_status fsad_model_fit(fsad_model* model, const char* const* texts, const int* labels,
                                    size_t n, unsigned long long seed);
FSAD_API fsad_status fsad_model_score(const fsad_model* model, const char* const* texts, size_t n,
                                      double* scores);

#ifdef __cplusplus
}
#endif

#endif
