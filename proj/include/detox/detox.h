// Copyright 2026 The Detox-Chain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DETOX_DETOX_H_
#define DETOX_DETOX_H_

/* C interface to the Detox-Chain library.
 *
 * Structured values cross the boundary as UTF-8 JSON strings. Every string
 * returned through an out-parameter is owned by the caller and must be
 * released with detox_string_free. On failure a function returns a nonzero
 * status and detox_last_error() describes the failure for the calling
 * thread until its next call into the library. */

#include <stddef.h>

#if defined(_WIN32)
#if defined(DETOX_BUILDING_LIBRARY)
#define DETOX_API __declspec(dllexport)
#else
#define DETOX_API __declspec(dllimport)
#endif
#else
#define DETOX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum detox_status {
  DETOX_OK = 0,
  DETOX_E_INVALID_ARGUMENT = 1,
  DETOX_E_INVALID_RECORD = 2,
  DETOX_E_PARSE = 3,
  DETOX_E_EMPTY_INPUT = 4,
  DETOX_E_SHAPE = 5,
  DETOX_E_LABELING = 6,
  DETOX_E_SCRIPT_EXHAUSTED = 7,
  DETOX_E_CONFIGURATION = 8,
  DETOX_E_SERVICE = 9,
  DETOX_E_PROTOCOL = 10,
  DETOX_E_IO = 11,
  DETOX_E_PRECONDITION = 12,
  DETOX_E_ALIGNMENT = 13,
  DETOX_E_MALFORMED_FILL = 14,
  DETOX_E_CANCELLED = 15,
  DETOX_E_INTERNAL = 16
} detox_status;

typedef struct detox_span_model detox_span_model;

DETOX_API const char* detox_version(void);
DETOX_API const char* detox_status_name(detox_status status);

/* Message of the last failure on this thread; "" if none. */
DETOX_API const char* detox_last_error(void);
/* {"error": name, "code": n, "message": text} for the last failure. */
DETOX_API const char* detox_last_error_json(void);

DETOX_API void detox_string_free(char* s);

/* Chain codec. record_json uses the corpus line layout; placeholder may be
 * NULL for the default "<MASK>". */
DETOX_API detox_status detox_render_chain(const char* record_json, const char* placeholder,
                                          char** out_text);
DETOX_API detox_status detox_parse_chain(const char* text, int lenient, const char* placeholder,
                                         char** out_json);

/* Span model checkpoints. expected_k = 0 accepts any span length. */
DETOX_API detox_status detox_span_model_load(const char* path, size_t expected_k,
                                             detox_span_model** out);
DETOX_API void detox_span_model_free(detox_span_model* model);
DETOX_API size_t detox_span_model_k(const detox_span_model* model);
/* Scores one text; lambda < 0 uses the checkpoint threshold. */
DETOX_API detox_status detox_span_model_score(const detox_span_model* model, const char* text,
                                              double lambda, char** out_json);

DETOX_API detox_status detox_edit_distance(const char* a, const char* b, int char_mode,
                                           size_t* out);

/* Resolves defaults, then config_path (may be NULL), then overrides_json
 * (may be NULL) into the effective run configuration. */
DETOX_API detox_status detox_config_resolve(const char* config_path, const char* overrides_json,
                                            char** out_json);

/* Runs one job command (ingest, build-chains, build-chains-api, train-span,
 * detect, evaluate, grade-chains, parse-chain). args_json holds inputs
 * outside the run config and may be NULL. When a run is cancelled or aborted
 * the summary is still written to out_json, partial outputs keep a
 * ".partial" suffix, and the status is DETOX_E_CANCELLED or
 * DETOX_E_SERVICE. */
DETOX_API detox_status detox_run_command(const char* command, const char* config_path,
                                         const char* overrides_json, const char* args_json,
                                         char** out_json);

/* Async-signal-safe: asks running jobs to stop after the current record. */
DETOX_API void detox_request_cancel(void);
DETOX_API void detox_reset_cancel(void);

#ifdef __cplusplus
}
#endif

#endif /* DETOX_DETOX_H_ */
