/* SPDX-License-Identifier: Apache-2.0 */
/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "pfc/pfc.h"

static int failures = 0;

#define EXPECT(cond)                                                    \
    do {                                                                \
        if (!(cond)) {                                                  \
            fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                 \
        }                                                               \
    } while (0)

static const char* seq_text =
    "mode A freq=8.70GHz gamma=170kHz q_int=900e3\n"
    "mode B freq=9.33GHz t1=14.9us\n"
    "seg load dur=2us nbar=10 method=direct\n"
    "seg swap dur=0.6us gp=0.4167MHz\n"
    "seg readout dur=2us\n";

static void config_and_run(void) {
    pfc_config* cfg = NULL;
    pfc_result* res = NULL;
    double v = 0.0;
    size_t i;
    EXPECT(pfc_config_parse("dphi = 0.2\n", ".", &cfg) == PFC_OK);
    EXPECT(pfc_run("splitting", cfg, 2, 0, &res) == PFC_OK);
    EXPECT(pfc_result_metric(res, "dip_separation_hz", &v) == PFC_OK);
    EXPECT(fabs(v - 2.4e6) < 0.05 * 2.4e6);
    EXPECT(pfc_result_metric(res, "no_such_metric", &v) == PFC_INVALID_ARGUMENT);
    EXPECT(pfc_result_metric_count(res) > 0);
    EXPECT(pfc_result_metric_name(res, pfc_result_metric_count(res)) == NULL);
    EXPECT(pfc_result_file_count(res) == 2);
    for (i = 0; i < pfc_result_file_count(res); ++i)
        EXPECT(strlen(pfc_result_file_contents(res, i)) > 0);
    EXPECT(strcmp(pfc_result_file_name(res, 1), "report.txt") == 0);
    pfc_result_free(res);

    EXPECT(pfc_config_set(cfg, "delay_start", "1us") == PFC_OK);
    res = NULL;
    EXPECT(pfc_run("splitting", cfg, 1, 0, &res) == PFC_VALIDATION_ERROR);
    EXPECT(res == NULL);
    EXPECT(strlen(pfc_last_error()) > 0);
    EXPECT(pfc_run("nonsense", cfg, 1, 0, &res) == PFC_VALIDATION_ERROR);
    pfc_config_free(cfg);
}

static void errors(void) {
    pfc_config* cfg = NULL;
    EXPECT(pfc_config_parse("nbar = 3\ncolour = red\n", ".", &cfg) == PFC_VALIDATION_ERROR);
    EXPECT(pfc_last_error_line() == 2);
    EXPECT(pfc_config_parse(NULL, ".", &cfg) == PFC_INVALID_ARGUMENT);
    EXPECT(pfc_config_load("/nonexistent/run.cfg", &cfg) == PFC_VALIDATION_ERROR);
    EXPECT(pfc_config_new(&cfg) == PFC_OK);
    pfc_config_free(cfg);
    pfc_config_free(NULL);
    pfc_result_free(NULL);
    pfc_sequence_free(NULL);
    pfc_trace_free(NULL);
    EXPECT(pfc_sequence_emit(NULL) == NULL);
    EXPECT(pfc_trace_sample_count(NULL) == 0);
}

static void sequences(void) {
    pfc_sequence* seq = NULL;
    pfc_sequence* again = NULL;
    pfc_trace* tr = NULL;
    double s[7];
    size_t n, i;
    EXPECT(pfc_sequence_parse(seq_text, &seq) == PFC_OK);
    EXPECT(pfc_sequence_segment_count(seq) == 3);
    EXPECT(pfc_sequence_parse(pfc_sequence_emit(seq), &again) == PFC_OK);
    EXPECT(strcmp(pfc_sequence_emit(seq), pfc_sequence_emit(again)) == 0);
    pfc_sequence_free(again);

    EXPECT(pfc_sequence_run(seq, &tr) == PFC_OK);
    n = pfc_trace_sample_count(tr);
    EXPECT(n > 100);
    EXPECT(pfc_trace_sample(tr, 0, s) == PFC_OK);
    EXPECT(s[0] == 0.0);
    /* A direct load places the field at the end of the load segment. */
    for (i = 0; i < n; ++i) {
        pfc_trace_sample(tr, i, s);
        if (s[0] >= 2e-6 - 1e-15)
            break;
    }
    EXPECT(fabs(s[1] * s[1] + s[2] * s[2] - 10.0) < 1e-12);
    EXPECT(pfc_trace_sample(tr, n, s) == PFC_INVALID_ARGUMENT);
    EXPECT(pfc_trace_sample(tr, n - 1, s) == PFC_OK);
    EXPECT(fabs(s[0] - 4.6e-6) < 1e-12);
    EXPECT(strncmp(pfc_trace_csv(tr), "t", 1) == 0 || pfc_trace_csv(tr)[0] == '#');
    pfc_trace_free(tr);
    pfc_sequence_free(seq);

    EXPECT(pfc_sequence_parse("seg swap dur=1us\n", &seq) == PFC_VALIDATION_ERROR);
    EXPECT(pfc_sequence_parse("seg load dur=1 nbar=1\n", &seq) == PFC_VALIDATION_ERROR);
    EXPECT(pfc_last_error_line() == 1);
}

int main(void) {
    config_and_run();
    errors();
    sequences();
    if (failures)
        fprintf(stderr, "%d failure(s)\n", failures);
    else
        printf("capi: all checks passed\n");
    return failures ? 1 : 0;
}
