#ifndef GADGETKIT_H
#define GADGETKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define GK_OK 0

/**
 * A required pointer argument was null.
 */
#define GK_ERR_NULL -1

/**
 * A string argument was not valid UTF-8.
 */
#define GK_ERR_UTF8 -2

/**
 * JSON or action text could not be parsed.
 */
#define GK_ERR_PARSE -3

/**
 * The scenario failed validation.
 */
#define GK_ERR_SCENARIO -4

/**
 * The request does not fit the session phase (for example after game over).
 */
#define GK_ERR_PHASE -5

/**
 * Bad ids, off-table poses and similar request errors.
 */
#define GK_ERR_BAD_REQUEST -6

/**
 * The action sequence has violations; the report is still returned.
 */
#define GK_ERR_INVALID_SEQUENCE -7

/**
 * Agent, gateway, simulation or I/O failure.
 */
#define GK_ERR_SESSION -8

/**
 * A Rust panic was caught at the boundary.
 */
#define GK_ERR_PANIC -99

/**
 * Opaque session handle.
 */
typedef struct GkSession GkSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *gk_version(void);

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; do not free.
 */
const char *gk_last_error(void);

/**
 * Create a session from scenario JSON. `mock_script_json` is the scripted
 * agent reply list; when null, the scenario's `mock_script` path is used
 * (relative to the working directory).
 *
 * # Safety
 * String arguments are null or NUL-terminated; `out` is valid for writes.
 */
int32_t gk_session_create(const char *scenario_json,
                          const char *mock_script_json,
                          struct GkSession **out);

/**
 * Create a session from a scenario file; its `mock_script` is resolved
 * relative to the file.
 *
 * # Safety
 * `path` is null or NUL-terminated; `out` is valid for writes.
 */
int32_t gk_session_load(const char *path, struct GkSession **out);

/**
 * Release a session. Null is ignored.
 *
 * # Safety
 * `h` is null or a live handle from this library, not used afterwards.
 */
void gk_session_free(struct GkSession *h);

/**
 * Run one player command to completion. `out_result_json` receives the
 * turn result; a turn that the agents could not plan still returns `GK_OK`
 * with `"ok": false`.
 *
 * # Safety
 * `h` is a live handle; `text` is NUL-terminated; `out_result_json` is valid for writes.
 */
int32_t gk_session_submit(struct GkSession *h, const char *text, char **out_result_json);

/**
 * Overwrite robot poses, as from an external tracker:
 * `{"id": {"x": mm, "y": mm, "heading": deg}}`.
 *
 * # Safety
 * `h` is a live handle; `poses_json` is NUL-terminated.
 */
int32_t gk_session_push_poses(struct GkSession *h, const char *poses_json);

/**
 * Current world as pretty JSON.
 *
 * # Safety
 * `h` is a live handle; `out` is valid for writes.
 */
int32_t gk_session_world_json(const struct GkSession *h, char **out);

/**
 * Transcript so far as JSON lines.
 *
 * # Safety
 * `h` is a live handle; `out` is valid for writes.
 */
int32_t gk_session_transcript(const struct GkSession *h, char **out);

/**
 * Pull the action block out of a free-form agent reply and write its
 * canonical JSON.
 *
 * # Safety
 * `reply` is NUL-terminated; `out_canonical` is valid for writes.
 */
int32_t gk_parse_action(const char *reply, char **out_canonical);

/**
 * Check a canonical action sequence against a scenario's start position.
 * The violation report (JSON) is written whether or not it is empty;
 * the return is `GK_ERR_INVALID_SEQUENCE` when it is not.
 *
 * # Safety
 * String arguments are NUL-terminated; `out_report_json` is valid for writes.
 */
int32_t gk_validate_sequence(const char *scenario_json,
                             const char *sequence_json,
                             char **out_report_json);

/**
 * Replay a JSON-lines transcript against a scenario and write the final world.
 *
 * # Safety
 * String arguments are NUL-terminated; `out_world_json` is valid for writes.
 */
int32_t gk_replay(const char *scenario_json, const char *transcript_jsonl, char **out_world_json);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or a string from this library that has not been freed.
 */
void gk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GADGETKIT_H */
