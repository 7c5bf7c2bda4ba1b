/* C interface to the specgen core library. Regenerate with:
 *   cbindgen --config crates/ffi/cbindgen.toml --crate specgen-ffi --output crates/ffi/include/specgen_ffi.h
 */

#ifndef SPECGEN_FFI_H
#define SPECGEN_FFI_H

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function in this library.
typedef enum SgStatus {
  // Success.
  SG_STATUS_OK = 0,
  // A required pointer argument was NULL.
  SG_STATUS_NULL_ARGUMENT = 1,
  // An input string was not valid UTF-8.
  SG_STATUS_INVALID_UTF8 = 2,
  // The input could not be parsed or analyzed; see
  // `sg_last_error_message`.
  SG_STATUS_PARSE_ERROR = 3,
  // A file or directory was missing or unreadable.
  SG_STATUS_IO_ERROR = 4,
  // A panic was caught at the FFI boundary; see `sg_last_error_message`.
  SG_STATUS_INTERNAL = 5,
} SgStatus;

// Opaque handle to a loaded case bundle.
typedef struct SgBundle SgBundle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Human-readable description of the most recent failure on this thread.
// The pointer stays valid until the next call into this library from the
// same thread. Never NULL; empty before the first failure.
const char *sg_last_error_message(void);

// Library version as a static NUL-terminated string; never freed.
const char *sg_version(void);

// Release a string returned by this library. NULL is accepted and ignored.
//
// # Safety
// `s` must be NULL or a pointer returned by this library, not yet freed.
void sg_string_free(char *s);

// Load a bundle from a manifest directory into a new handle.
//
// # Safety
// `dir` must be a NUL-terminated path; `out` must point to writable
// storage for one pointer.
enum SgStatus sg_bundle_load(const char *dir, struct SgBundle **out);

// Release a bundle handle. NULL is accepted and ignored.
//
// # Safety
// `bundle` must be NULL or a pointer returned by [`sg_bundle_load`], not
// yet freed.
void sg_bundle_free(struct SgBundle *bundle);

// Bundle name as a new string owned by the caller.
//
// # Safety
// `bundle` must be a live handle; `out` must be writable.
enum SgStatus sg_bundle_name(const struct SgBundle *bundle, char **out);

// Number of specification items in the bundle.
//
// # Safety
// `bundle` must be NULL (returns 0) or a live handle.
size_t sg_bundle_spec_count(const struct SgBundle *bundle);

// Validate a bundle; writes the findings as a JSON array (empty when the
// bundle is well-formed).
//
// # Safety
// `bundle` must be a live handle; `out_json` must be writable.
enum SgStatus sg_bundle_validate(const struct SgBundle *bundle, char **out_json);

// Run the code-quality critic on a standalone C source string. The source
// is treated as already compiled with zero warnings; the result is the
// quality report serialized as JSON.
//
// # Safety
// `source` must be NUL-terminated; `out_json` must be writable.
enum SgStatus sg_check_quality(const char *source, char **out_json);

// Effective lines of code of the named function inside `source`.
//
// # Safety
// `source` and `function_name` must be NUL-terminated; `out_loc` must be
// writable.
enum SgStatus sg_count_loc(const char *source, const char *function_name, size_t *out_loc);

// Rewrite ghost declaration annotations into concrete declarations,
// returning the transformed source.
//
// # Safety
// `source` must be NUL-terminated; `out` must be writable.
enum SgStatus sg_degrade_ghosts(const char *source, char **out);

// Parse verifier output into its proved/total goal counts.
//
// # Safety
// `log_text` must be NUL-terminated; `out_proved` and `out_total` must be
// writable.
enum SgStatus sg_parse_goal_summary(const char *log_text,
                                    uint32_t *out_proved,
                                    uint32_t *out_total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECGEN_FFI_H */
