#ifndef NUGGETINDEX_H
#define NUGGETINDEX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NiStatus {
  NI_STATUS_OK = 0,
  NI_STATUS_NULL_ARGUMENT = 1,
  NI_STATUS_INVALID_INPUT = 2,
  NI_STATUS_SCHEMA_MISSING = 3,
  NI_STATUS_NOT_FOUND = 4,
  NI_STATUS_CONFLICT = 5,
  NI_STATUS_IO = 6,
  NI_STATUS_INTERNAL = 7,
} NiStatus;

/**
 * Opaque engine handle.
 */
typedef struct NiEngine NiEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens an engine from a TOML config file. A null path gives an empty
 * in-memory engine with no schema.
 *
 * # Safety
 * `config_path` is null or a valid string; `out` is valid for writes.
 */
enum NiStatus ni_engine_open(const char *config_path, struct NiEngine **out);

/**
 * Opens an in-memory engine with a schema (JSON array) and optional
 * alias table (JSON object).
 *
 * # Safety
 * `schema_json` is a valid string; `aliases_json` is null or a valid
 * string; `out` is valid for writes.
 */
enum NiStatus ni_engine_open_in_memory(const char *schema_json,
                                       const char *aliases_json,
                                       struct NiEngine **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` is null or a live handle; it must not be used afterwards.
 */
void ni_engine_free(struct NiEngine *h);

/**
 * Ingests a JSON array of documents; writes the summary JSON to
 * `out_json`.
 *
 * # Safety
 * `h` is a live handle; `docs_json` is a valid string; `out_json` is
 * null or valid for writes.
 */
enum NiStatus ni_ingest(const struct NiEngine *h, const char *docs_json, char **out_json);

/**
 * Retrieves up to `k` nuggets valid at `at` (YYYY-MM-DD). `view` is
 * "active", "active_plus_contested" or null for active. Writes the
 * result and its context block as JSON to `out_json`.
 *
 * # Safety
 * `h` is a live handle; `text` and `at` are valid strings; `view` is
 * null or a valid string; `out_json` is valid for writes.
 */
enum NiStatus ni_query(const struct NiEngine *h,
                       const char *text,
                       const char *at,
                       const char *view,
                       size_t k,
                       char **out_json);

/**
 * Writes the full record of a nugget (32 hex digit id) as JSON.
 *
 * # Safety
 * `h` is a live handle; `id` is a valid string; `out_json` is valid for
 * writes.
 */
enum NiStatus ni_get_nugget(const struct NiEngine *h, const char *id, char **out_json);

/**
 * Open review items, oldest first, as JSON.
 *
 * # Safety
 * `h` is a live handle; `out_json` is valid for writes.
 */
enum NiStatus ni_open_reviews(const struct NiEngine *h, size_t limit, char **out_json);

/**
 * Applies a reviewer decision, `{"action": ..., "winner_id"?: ...}`.
 * Returns `Conflict` when the nugget has no open review item.
 *
 * # Safety
 * `h` is a live handle; `id` and `decision_json` are valid strings;
 * `note` is null or a valid string; `out_json` is null or valid for
 * writes.
 */
enum NiStatus ni_decide(const struct NiEngine *h,
                        const char *id,
                        const char *decision_json,
                        const char *note,
                        char **out_json);

/**
 * Record counts by status, open reviews and store size as JSON.
 *
 * # Safety
 * `h` is a live handle; `out_json` is valid for writes.
 */
enum NiStatus ni_stats(const struct NiEngine *h, char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or a string from this library not yet freed.
 */
void ni_string_free(char *s);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next call on this thread.
 */
const char *ni_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NUGGETINDEX_H */
