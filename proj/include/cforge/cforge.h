/* C interface to the constraint-forge pipeline. */
#ifndef CFORGE_CFORGE_H_
#define CFORGE_CFORGE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CF_API __declspec(dllexport)
#else
#define CF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cf_status {
  CF_OK = 0,
  CF_INVALID_ARGUMENT = 1,
  CF_CONFIG = 2,
  CF_IO = 3,
  CF_PARSE = 4,
  CF_TRANSPORT = 5,
  CF_AUTHENTICATION = 6,
  CF_RATE_LIMITED = 7,
  CF_EMPTY_COMPLETION = 8,
  CF_UNSCRIPTED = 9,
  CF_EXHAUSTED = 10,
  CF_VALIDATION = 11,
  CF_STAGE = 12,
  CF_INTERNAL = 13
} cf_status;

typedef struct cf_pipeline cf_pipeline;

typedef struct cf_loss_sample {
  double logp_policy_chosen;
  double logp_ref_chosen;
  double logp_policy_rejected;
  double logp_ref_rejected;
} cf_loss_sample;

typedef struct cf_loss {
  double dpo;
  double sft;
  double total;
} cf_loss;

CF_API const char* cf_version(void);
CF_API const char* cf_status_string(cf_status status);

/* Message of the most recent failure on this thread, or "" after success.
   Valid until the next call on the same thread. */
CF_API const char* cf_last_error(void);

/* 0 debug, 1 info, 2 warn, 3 error, 4 off. Logs go to stderr. */
CF_API void cf_set_log_level(int level);

/* Strings returned through char** out-parameters are owned by the caller. */
CF_API void cf_string_free(char* s);

/* Builds a pipeline from a config file or JSON text. `overrides_json` may be
   NULL; its keys replace config fields, relative paths resolving against the
   working directory. */
CF_API cf_status cf_pipeline_create_from_file(const char* config_path, const char* overrides_json,
                                              cf_pipeline** out);
CF_API cf_status cf_pipeline_create_from_json(const char* config_json, const char* base_dir,
                                              const char* overrides_json, cf_pipeline** out);
CF_API void cf_pipeline_destroy(cf_pipeline* pipeline);

/* stage: seeds | build | judge | assemble | stats | verbs | run. */
CF_API cf_status cf_pipeline_run_stage(cf_pipeline* pipeline, const char* stage);

/* stats or verbs over another artifact root; output still goes to output_dir. */
CF_API cf_status cf_pipeline_report(cf_pipeline* pipeline, const char* which, const char* input_root);

/* JSON of the run summary: per-stage counts and warnings. */
CF_API cf_status cf_pipeline_summary_json(const cf_pipeline* pipeline, char** out_json);
CF_API cf_status cf_pipeline_config_json(const cf_pipeline* pipeline, char** out_json);
CF_API const char* cf_pipeline_output_dir(const cf_pipeline* pipeline);
CF_API uint64_t cf_pipeline_upstream_calls(const cf_pipeline* pipeline);

/* Validates artifact paths (directories as trees, files by name). `*out_ok` is
   1 iff there are no violations; the report is JSON or text. */
CF_API cf_status cf_validate_paths(const char* const* paths, size_t count, int as_json,
                                   int* out_ok, char** out_report);

CF_API cf_status cf_kendall_tau(const char* const* r1, const char* const* r2, size_t n,
                                double* out);
CF_API cf_status cf_position_consistency(const char* const* r1, const char* const* r2, size_t n,
                                         double* out);
CF_API cf_status cf_dpo_sft_loss(const cf_loss_sample* batch, size_t n, double beta, cf_loss* out);

/* Largest-remainder split of `budget` over `n` stage sizes into `out`. */
CF_API cf_status cf_allocate_replay(const uint64_t* stage_sizes, size_t n, uint64_t budget,
                                    uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif /* CFORGE_CFORGE_H_ */
