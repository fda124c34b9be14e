/* C interface to the tsfound library. All handles are opaque; every call
 * returning tsf_status leaves a message for tsf_last_error() on failure.
 * Strings returned through char** must be released with tsf_string_free. */
#ifndef TSFOUND_H
#define TSFOUND_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TSF_API __declspec(dllexport)
#else
#define TSF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tsf_status {
    TSF_OK = 0,
    TSF_ERR_VALIDATION = 1, /* bad config, input or request */
    TSF_ERR_RUNTIME = 2,    /* non-finite loss, unreadable data, I/O */
    TSF_ERR_ARGUMENT = 3,   /* null handle or pointer */
    TSF_ERR_INTERNAL = 4
} tsf_status;

typedef struct tsf_config tsf_config;
typedef struct tsf_model tsf_model;
typedef struct tsf_prediction tsf_prediction;

/* Called for every training log record. */
typedef void (*tsf_log_fn)(void* user, int64_t step, double lr, double mse, double ql, double total);

TSF_API const char* tsf_version(void);
/* Message of the last failed call on this thread ("" if none). */
TSF_API const char* tsf_last_error(void);
TSF_API void tsf_string_free(char* s);

/* --- configuration --- */
TSF_API tsf_status tsf_config_preset(const char* name, tsf_config** out);
TSF_API tsf_status tsf_config_load(const char* path, tsf_config** out);
TSF_API void tsf_config_free(tsf_config* cfg);
TSF_API tsf_status tsf_config_set_seed(tsf_config* cfg, uint64_t seed);
/* Overrides train.steps (> 0). */
TSF_API tsf_status tsf_config_set_steps(tsf_config* cfg, int64_t steps);
/* Overrides data.synth.series (>= 0). */
TSF_API tsf_status tsf_config_set_synth_series(tsf_config* cfg, int64_t series);
/* Replaces eval.datasets with one path. */
TSF_API tsf_status tsf_config_set_datasets(tsf_config* cfg, const char* path);
TSF_API tsf_status tsf_config_set_protocol(tsf_config* cfg, const char* protocol);
TSF_API tsf_status tsf_config_to_json(const tsf_config* cfg, char** out_json);
TSF_API tsf_status tsf_config_param_count(const tsf_config* cfg, uint64_t* out);

/* --- commands --- */
/* Writes corpus.jsonl and manifest.json under out_dir. */
TSF_API tsf_status tsf_synth(const tsf_config* cfg, const char* out_dir, char** out_corpus_path);
/* Trains per cfg; resume_checkpoint and log may be NULL. */
TSF_API tsf_status tsf_train(const tsf_config* cfg, const char* out_dir, const char* resume_checkpoint,
                             tsf_log_fn log, void* user, char** out_final_checkpoint);

/* --- models and forecasts --- */
/* expect may be NULL; otherwise its model section must match the checkpoint. */
TSF_API tsf_status tsf_model_load(const char* checkpoint, const tsf_config* expect, tsf_model** out);
TSF_API void tsf_model_free(tsf_model* model);
TSF_API tsf_status tsf_model_param_count(const tsf_model* model, uint64_t* out);
/* levels may be NULL (n_levels 0) to report every trained level. */
TSF_API tsf_status tsf_forecast(const tsf_model* model, const double* context, size_t n_context, int32_t horizon,
                                const double* levels, size_t n_levels, tsf_prediction** out);
TSF_API void tsf_forecast_free(tsf_prediction* fc);
TSF_API size_t tsf_forecast_horizon(const tsf_prediction* fc);
TSF_API const double* tsf_forecast_point(const tsf_prediction* fc);
TSF_API size_t tsf_forecast_num_levels(const tsf_prediction* fc);
TSF_API const double* tsf_forecast_levels(const tsf_prediction* fc);
/* horizon x num_levels, row-major. */
TSF_API const double* tsf_forecast_quantiles(const tsf_prediction* fc);
TSF_API int32_t tsf_forecast_steps(const tsf_prediction* fc);
/* One JSON object per line for every series in input_path. */
TSF_API tsf_status tsf_forecast_file(const tsf_model* model, const char* input_path, int32_t horizon,
                                     const double* levels, size_t n_levels, char** out_jsonl);

/* --- evaluation --- */
/* model NULL evaluates the seasonal-naive baseline. Writes report.json and
 * report.csv under out_dir (when not NULL) and returns the JSON report. */
TSF_API tsf_status tsf_evaluate(const tsf_model* model, const tsf_config* cfg, const char* out_dir,
                                char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif
