/* SPDX-License-Identifier: Apache-2.0 */
#ifndef PFC_H
#define PFC_H

/* C interface to the parametric frequency conversion simulator. Every call
 * returns a status; on failure pfc_last_error() describes it (per thread). */

#include <stddef.h>

#if defined(_WIN32)
#define PFC_API __declspec(dllexport)
#else
#define PFC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pfc_status {
    PFC_OK = 0,
    PFC_ERROR = 1,
    PFC_VALIDATION_ERROR = 2,
    PFC_CONVERGENCE_ERROR = 3,
    PFC_IO_ERROR = 4,
    PFC_INVALID_ARGUMENT = 5
} pfc_status;

typedef struct pfc_config pfc_config;
typedef struct pfc_result pfc_result;
typedef struct pfc_sequence pfc_sequence;
typedef struct pfc_trace pfc_trace;

PFC_API const char* pfc_last_error(void);
/* Line of the last parse error, 0 if none. */
PFC_API size_t pfc_last_error_line(void);

PFC_API pfc_status pfc_config_new(pfc_config** out);
PFC_API pfc_status pfc_config_parse(const char* text, const char* base_dir, pfc_config** out);
PFC_API pfc_status pfc_config_load(const char* path, pfc_config** out);
PFC_API pfc_status pfc_config_set(pfc_config* cfg, const char* key, const char* value);
PFC_API void pfc_config_free(pfc_config* cfg);

/* Runner names: splitting, chevron, power_sweep, store_retrieve,
 * phase_sweep, custom_sequence. jobs == 0 means one worker. */
PFC_API pfc_status pfc_run(const char* runner, const pfc_config* cfg, size_t jobs, int lab_frame,
                           pfc_result** out);
PFC_API pfc_status pfc_result_metric(const pfc_result* res, const char* name, double* value);
PFC_API size_t pfc_result_metric_count(const pfc_result* res);
/* Name of the i-th metric (sorted); NULL when out of range. */
PFC_API const char* pfc_result_metric_name(const pfc_result* res, size_t i);
PFC_API size_t pfc_result_file_count(const pfc_result* res);
PFC_API const char* pfc_result_file_name(const pfc_result* res, size_t i);
PFC_API const char* pfc_result_file_contents(const pfc_result* res, size_t i);
PFC_API pfc_status pfc_result_write(const pfc_result* res, const char* dir);
PFC_API void pfc_result_free(pfc_result* res);

PFC_API pfc_status pfc_sequence_parse(const char* text, pfc_sequence** out);
PFC_API pfc_status pfc_sequence_load(const char* path, pfc_sequence** out);
/* Borrowed string, valid until the sequence is freed. */
PFC_API const char* pfc_sequence_emit(const pfc_sequence* seq);
PFC_API size_t pfc_sequence_segment_count(const pfc_sequence* seq);
PFC_API pfc_status pfc_sequence_run(const pfc_sequence* seq, pfc_trace** out);
PFC_API void pfc_sequence_free(pfc_sequence* seq);

PFC_API size_t pfc_trace_sample_count(const pfc_trace* tr);
/* Writes t, re a, im a, re b, im b, re a_out, im a_out into values[7]. */
PFC_API pfc_status pfc_trace_sample(const pfc_trace* tr, size_t i, double* values);
PFC_API const char* pfc_trace_csv(const pfc_trace* tr);
PFC_API void pfc_trace_free(pfc_trace* tr);

#ifdef __cplusplus
}
#endif

#endif
