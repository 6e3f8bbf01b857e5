/* C interface to the flowstack dialogue engine. */

#ifndef FLOWSTACK_H
#define FLOWSTACK_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum {
  FS_STATUS_OK = 0,
  // A required pointer argument was null.
  FS_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  FS_STATUS_INVALID_UTF8 = 2,
  // The assistant directory could not be read or parsed.
  FS_STATUS_LOAD_FAILED = 3,
  // The domain loaded but failed validation.
  FS_STATUS_INVALID_DOMAIN = 4,
  // A result could not be serialized.
  FS_STATUS_SERIALIZATION = 5,
  // The engine panicked; the handle involved should be freed.
  FS_STATUS_PANIC = 6,
} FsStatus;

// A loaded assistant and its engine. Shareable across threads for
// read-only calls; sessions created from it stay valid after it is freed.
typedef struct FsAssistant FsAssistant;

// One conversation. Not thread-safe: use a session from one thread at a
// time.
typedef struct FsSession FsSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads the assistant in directory `dir`. With `deterministic`, the first
// response variant is always used, rephrasing is off and timestamps are
// logical, so transcripts are reproducible.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
FsStatus fs_assistant_load(const char *dir, bool deterministic, FsAssistant **out);

// Releases an assistant. Null is ignored.
//
// # Safety
// `assistant` must come from [`fs_assistant_load`] and not be used again.
void fs_assistant_free(FsAssistant *assistant);

// Validates the domain files in `dir` without building an engine and
// writes `{"errors": [...], "warnings": [...]}` to `out`. Returns
// `InvalidDomain` when the report contains errors; the report is written
// either way.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
FsStatus fs_validate(const char *dir, char **out);

// Starts a conversation. `conversation_id` may be null for an empty id.
//
// # Safety
// `assistant` must be a live handle, `conversation_id` null or a
// NUL-terminated string, and `out` a valid pointer.
FsStatus fs_session_new(const FsAssistant *assistant, const char *conversation_id, FsSession **out);

// Releases a session. Null is ignored.
//
// # Safety
// `session` must come from [`fs_session_new`] and not be used again.
void fs_session_free(FsSession *session);

// Runs one turn and writes the turn report as JSON:
// `{"messages": [{"text", "template"}], "state": {...}, "debug": {...}}`.
//
// # Safety
// `session` must be a live handle, `text` a NUL-terminated string and
// `out` a valid pointer.
FsStatus fs_session_send(FsSession *session, const char *text, char **out);

// Writes the conversation's slots, stack and its last `recent_events`
// events as JSON.
//
// # Safety
// `session` must be a live handle and `out` a valid pointer.
FsStatus fs_session_snapshot(const FsSession *session, uint32_t recent_events, char **out);

// Runs the assistant's bundled conversation tests with their scripted
// commands and writes the report as JSON. Failing tests are reported in
// the JSON, not through the status.
//
// # Safety
// `assistant` must be a live handle and `out` a valid pointer.
FsStatus fs_run_tests(const FsAssistant *assistant, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used again.
void fs_string_free(char *s);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library on this thread.
const char *fs_last_error(void);

// Library version, e.g. `"0.1.0"`. Static; never free it.
const char *fs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWSTACK_H */
