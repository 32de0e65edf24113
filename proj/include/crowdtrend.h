/* C interface to the crowdtrend core. All strings are UTF-8 and
 * NUL-terminated. Strings returned through `char**` are owned by the caller
 * and released with ct_string_free. On failure a function returns a nonzero
 * ct_status and ct_last_error() describes it (per thread). */
#ifndef CROWDTREND_H
#define CROWDTREND_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CT_API __declspec(dllexport)
#else
#define CT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ct_status {
    CT_OK = 0,
    CT_ERR_INVALID_ARGUMENT = 1,
    CT_ERR_PARSE = 2,         /* query syntax; see ct_last_error_offset */
    CT_ERR_CONFIG = 3,        /* project config validation */
    CT_ERR_NOT_FOUND = 4,
    CT_ERR_CONFLICT = 5,      /* out-of-order answer */
    CT_ERR_GONE = 6,          /* lease expired or session unknown */
    CT_ERR_EMPTY = 7,         /* nothing to serve / nothing to train on */
    CT_ERR_IO = 8,
    CT_ERR_CHECK_FAILED = 9,  /* replay verification found differences */
    CT_ERR_INTERNAL = 99
} ct_status;

typedef struct ct_query ct_query;
typedef struct ct_platform ct_platform;

CT_API const char* ct_version(void);
CT_API const char* ct_last_error(void);
/* Byte offset attached to the last error, or -1. */
CT_API int64_t ct_last_error_offset(void);
CT_API void ct_string_free(char* s);

/* Query language. */
CT_API ct_status ct_query_parse(const char* source, ct_query** out);
CT_API ct_status ct_query_print(const ct_query* query, char** out);
CT_API ct_status ct_query_matches(const ct_query* query, const char* text, int* out);
CT_API void ct_query_free(ct_query* query);

typedef enum ct_sync_mode { CT_SYNC_NONE = 0, CT_SYNC_FLUSH = 1, CT_SYNC_FSYNC = 2 } ct_sync_mode;

typedef struct ct_platform_options {
    const char* data_dir;       /* required */
    unsigned workers;           /* 0 means 1 */
    int simulated_clock;        /* nonzero: time moves only via ct_platform_set_time */
    const char* clock_start;    /* RFC 3339; simulated clock start, may be NULL */
    ct_sync_mode sync;
} ct_platform_options;

CT_API ct_status ct_platform_open(const ct_platform_options* options, ct_platform** out);
/* Drains, stops, snapshots and frees. Accepts NULL. */
CT_API void ct_platform_close(ct_platform* platform);
CT_API ct_status ct_platform_set_time(ct_platform* platform, const char* rfc3339);

/* Creates a project (or a new sequence version of an existing one) from a
 * JSON config. Writes the project id to *id_out when id_out is non-NULL. */
CT_API ct_status ct_project_create(ct_platform* platform, const char* config_json, char** id_out);
CT_API ct_status ct_project_describe(ct_platform* platform, const char* project_id, char** json_out);

/* Replays an NDJSON file through the pipeline; stats as JSON. */
CT_API ct_status ct_ingest_file(ct_platform* platform, const char* project_id, const char* path, double speedup,
                                char** stats_json);

typedef struct ct_scripted_options {
    const char* project_id;
    const char* source_path;
    double speedup;
    unsigned annotators;        /* 0 means 3 */
    unsigned round_every;       /* 0 means 200 */
    unsigned labels_per_round;  /* 0 means 10 */
    unsigned max_retrains;
} ct_scripted_options;

/* File replay with scripted annotators answering from each record's "truth"
 * field. Needs a platform opened with a simulated clock. */
CT_API ct_status ct_run_scripted(ct_platform* platform, const ct_scripted_options* options, char** report_json);

/* Session start; CT_ERR_EMPTY when the user has nothing to label. */
CT_API ct_status ct_next(ct_platform* platform, const char* project_id, const char* user, char** session_json);
CT_API ct_status ct_answer(ct_platform* platform, const char* project_id, const char* user, const char* doc_id,
                           const char* question_id, const char* answer_id, char** outcome_json);

CT_API ct_status ct_trends_csv(ct_platform* platform, const char* project_id, int recompute, char** csv);
CT_API ct_status ct_tick(ct_platform* platform, int allow_retrain, unsigned* retrains);
/* CT_ERR_EMPTY when fewer than two classes are labelled. */
CT_API ct_status ct_retrain(ct_platform* platform, const char* project_id, uint64_t* version);
CT_API ct_status ct_metrics(ct_platform* platform, char** json_out);
CT_API ct_status ct_state(ct_platform* platform, char** json_out);

/* HTTP API on a background thread. port 0 picks a free port. */
CT_API ct_status ct_serve_start(ct_platform* platform, const char* host, int port, int* bound_port);
CT_API ct_status ct_serve_stop(ct_platform* platform);

/* Verifies a data directory; writes "<n> events, OK" style text to *report. */
CT_API ct_status ct_replay_check(const char* data_dir, uint64_t* events, char** report);

/* Active-learning simulation; CSV with one row per seed. */
CT_API ct_status ct_simulate(unsigned seeds, const char* strategy, char** csv);

#ifdef __cplusplus
}
#endif

#endif
