#ifndef UITRIM_H
#define UITRIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UitrimStatus {
  UITRIM_STATUS_OK = 0,
  UITRIM_STATUS_NULL_POINTER = 1,
  UITRIM_STATUS_INVALID_UTF8 = 2,
  UITRIM_STATUS_MALFORMED_DOCUMENT = 3,
  UITRIM_STATUS_INVALID_PROGRAM = 4,
  UITRIM_STATUS_TRANSFORM_FAILED = 5,
  UITRIM_STATUS_INVALID_ARGUMENT = 6,
  UITRIM_STATUS_PANIC = 7,
} UitrimStatus;

/**
 * Parsed and validated program library (opaque).
 */
typedef struct UitrimLibrary UitrimLibrary;

/**
 * Parsed UI tree (opaque).
 */
typedef struct UitrimTree UitrimTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *uitrim_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 */
const char *uitrim_last_error(void);

/**
 * Parses a canonical or Android XML document.
 *
 * # Safety
 * `document` must be a NUL-terminated string; `out` a writable pointer.
 */
enum UitrimStatus uitrim_tree_parse(const char *document, struct UitrimTree **out);

/**
 * # Safety
 * `tree` must come from `uitrim_tree_parse`; `out` must be writable.
 */
enum UitrimStatus uitrim_tree_node_count(const struct UitrimTree *tree, size_t *out);

/**
 * # Safety
 * `tree` must come from `uitrim_tree_parse` and not be used afterwards.
 * Null is ignored.
 */
void uitrim_tree_free(struct UitrimTree *tree);

/**
 * Parses and validates a library (zero or more programs).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` a writable pointer.
 */
enum UitrimStatus uitrim_library_parse(const char *text, struct UitrimLibrary **out);

/**
 * # Safety
 * `lib` must come from `uitrim_library_parse`; `out` must be writable.
 */
enum UitrimStatus uitrim_library_len(const struct UitrimLibrary *lib, size_t *out);

/**
 * # Safety
 * `lib` must come from `uitrim_library_parse` and not be used afterwards.
 * Null is ignored.
 */
void uitrim_library_free(struct UitrimLibrary *lib);

/**
 * Applies `lib` (null = no programs) to `tree` and renders the result.
 * `kind` is a view renderer name (`hierarchical`, `dfs`, `random`) or null
 * for hierarchical. The rendered text is written to `out_text` and must be
 * released with `uitrim_string_free`; token counts use the default counter.
 *
 * # Safety
 * Pointers must be valid as documented; `out_before`/`out_after` may be null.
 */
enum UitrimStatus uitrim_transform(const struct UitrimTree *tree,
                                   const struct UitrimLibrary *lib,
                                   const char *kind,
                                   uint64_t seed,
                                   char **out_text,
                                   size_t *out_before,
                                   size_t *out_after);

/**
 * Counts tokens with the default deterministic tokenizer.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` a writable pointer.
 */
enum UitrimStatus uitrim_count_tokens(const char *text, size_t *out);

/**
 * # Safety
 * `s` must come from this library (e.g. `uitrim_transform`). Null is ignored.
 */
void uitrim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UITRIM_H */
