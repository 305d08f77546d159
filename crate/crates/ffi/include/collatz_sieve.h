#ifndef COLLATZ_SIEVE_H
#define COLLATZ_SIEVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A certificate was found but a concrete member contradicts it.
   */
  CS_STATUS_VERIFICATION_FAILED = 3,
  /**
   * No certificate exists for the class at its own modulus.
   */
  CS_STATUS_NOT_FOUND = 4,
  /**
   * A step cap, memory guard or overflow limit was hit.
   */
  CS_STATUS_LIMIT_EXCEEDED = 5,
  CS_STATUS_IO = 6,
  CS_STATUS_INTERNAL = 7,
} CsStatus;

/**
 * Opaque search state.
 */
typedef struct CsSearch CsSearch;

/**
 * Search settings; `step_cap = 0` selects the default per-class cap.
 */
typedef struct CsSearchConfig {
  uint64_t max_modulus;
  bool filter_3smooth;
  bool skip_covered;
  bool join_smooth_only;
  uint32_t step_cap;
  uint64_t k_verify;
  uint32_t threads;
} CsSearchConfig;

/**
 * One certified class. The `join_*` fields are zero for drop certificates.
 */
typedef struct CsRecord {
  uint64_t modulus;
  uint64_t remainder;
  uint32_t stop_index;
  bool joined;
  uint64_t join_modulus;
  uint64_t join_remainder;
  uint32_t join_index;
} CsRecord;

typedef struct CsStopTime {
  uint64_t n;
  uint64_t index;
  uint64_t join_value;
  uint64_t joined_start;
  uint64_t halvings;
} CsStopTime;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cs_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void cs_string_free(char *s);

/**
 * Creates a fresh search, seeded with the even numbers.
 *
 * # Safety
 * `config` must point to a valid config and `out` to writable storage.
 */
enum CsStatus cs_search_new(const struct CsSearchConfig *config, struct CsSearch **out);

/**
 * Restores a search from a checkpoint file and sets its target to
 * `config.max_modulus`. The other settings must match the checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `config` and `out` as for
 * [`cs_search_new`].
 */
enum CsStatus cs_search_resume(const char *path,
                               const struct CsSearchConfig *config,
                               struct CsSearch **out);

/**
 * Processes every modulus up to the configured maximum.
 *
 * # Safety
 * `search` must be a live handle from this library.
 */
enum CsStatus cs_search_run(struct CsSearch *search);

/**
 * Writes the current state as a checkpoint file (atomically).
 *
 * # Safety
 * `search` must be a live handle and `path` a NUL-terminated string.
 */
enum CsStatus cs_search_save(const struct CsSearch *search, const char *path);

/**
 * Number of emitted records; 0 for a null handle.
 *
 * # Safety
 * `search` must be null or a live handle.
 */
size_t cs_search_record_count(const struct CsSearch *search);

/**
 * Copies record `index` (in emission order) to `out`.
 *
 * # Safety
 * `search` must be a live handle and `out` writable.
 */
enum CsStatus cs_search_record(const struct CsSearch *search, size_t index, struct CsRecord *out);

/**
 * Covered density as an exact fraction `"p/q"`; free with [`cs_string_free`].
 *
 * # Safety
 * `search` must be a live handle and `out` writable.
 */
enum CsStatus cs_search_density(const struct CsSearch *search, char **out);

/**
 * Covered density as a percentage with `places` decimals, rounded half up.
 *
 * # Safety
 * As for [`cs_search_density`].
 */
enum CsStatus cs_search_density_percent(const struct CsSearch *search, uint32_t places, char **out);

/**
 * Releases a search handle. Null is ignored.
 *
 * # Safety
 * `search` must come from this library and not have been freed already.
 */
void cs_search_free(struct CsSearch *search);

/**
 * Certifies `b·k − c` against every class of smaller modulus and checks the
 * certificate on the members `k = 1..=k_max`.
 *
 * Returns `NotFound` when no certificate exists and `VerificationFailed`
 * when a member contradicts it; `out` (optional) receives the certificate.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum CsStatus cs_verify_class(uint64_t b, uint64_t c, uint64_t k_max, struct CsRecord *out);

/**
 * Modified stopping time of `n` against the trajectories of `2..n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CsStatus cs_modified_stopping_time(uint64_t n, struct CsStopTime *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLATZ_SIEVE_H */
