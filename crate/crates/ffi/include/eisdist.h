#ifndef EISDIST_H
#define EISDIST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Route selector for [`eis_parametrize`].
 */
typedef enum EisPath {
  EIS_PATH_CANONICAL = 0,
  EIS_PATH_ORBIT = 1,
  EIS_PATH_STABILIZER = 2,
} EisPath;

typedef enum EisStatus {
  EIS_STATUS_OK = 0,
  EIS_STATUS_NULL_ARGUMENT = 1,
  EIS_STATUS_INVALID_UTF8 = 2,
  EIS_STATUS_MALFORMED = 3,
  EIS_STATUS_DIMENSION = 4,
  EIS_STATUS_ZERO_INPUT = 5,
  EIS_STATUS_NON_COPRIME_MODULI = 6,
  EIS_STATUS_SINGULAR = 7,
  EIS_STATUS_NOT_SIMILITUDE = 8,
  EIS_STATUS_NON_UNIT = 9,
  EIS_STATUS_INADMISSIBLE = 10,
  EIS_STATUS_MODULUS_MISMATCH = 11,
  EIS_STATUS_NOT_CONTAINED = 12,
  EIS_STATUS_NOT_INVARIANT = 13,
  EIS_STATUS_LEVEL_BOUND = 14,
  EIS_STATUS_PRECONDITION = 15,
  /**
   * The selftest ran and some criterion failed.
   */
  EIS_STATUS_FAILED = 16,
  EIS_STATUS_INTERNAL = 17,
} EisStatus;

/**
 * Formal Eisenstein class handle.
 */
typedef struct EisClass EisClass;

/**
 * Engine configuration handle.
 */
typedef struct EisConfig EisConfig;

/**
 * Schwartz function handle.
 */
typedef struct EisSchwartz EisSchwartz;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * call into the library from the same thread.
 */
const char *eis_last_error(void);

/**
 * # Safety
 * `s` is null or a string returned by this library, not yet freed.
 */
void eis_string_free(char *s);

/**
 * Library version, static storage.
 */
const char *eis_version(void);

/**
 * Default configuration (genus 1, c = 2, p = 5).
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum EisStatus eis_config_default(struct EisConfig **out);

/**
 * Defaults overlaid with a JSON object; keys as in `ENGINE_CONFIG`.
 *
 * # Safety
 * `json` is a nul-terminated string; `out` must be valid for a write.
 */
enum EisStatus eis_config_from_json(const char *json, struct EisConfig **out);

/**
 * # Safety
 * `cfg` is null or a live handle from this library.
 */
void eis_config_free(struct EisConfig *cfg);

/**
 * Parses a Schwartz function: a JSON document or the command-line shorthand
 * (`basis:1,0@3`, `annulus:1,3`, `ch:...`).
 *
 * # Safety
 * Pointers must be valid; `input` nul-terminated.
 */
enum EisStatus eis_schwartz_parse(const struct EisConfig *cfg,
                                  const char *input,
                                  struct EisSchwartz **out);

/**
 * # Safety
 * `f` is a live handle; `out` must be valid for a write.
 */
enum EisStatus eis_schwartz_to_json(const struct EisSchwartz *f, char **out);

/**
 * # Safety
 * `f` is null or a live handle from this library.
 */
void eis_schwartz_free(struct EisSchwartz *f);

/**
 * Parses a class: a JSON document or shorthand such as `3*eps:1,0@9 + eps:0,1@9`.
 * `weight` is used only by the shorthand.
 *
 * # Safety
 * Pointers must be valid; `input` nul-terminated.
 */
enum EisStatus eis_class_parse(const char *input, uint32_t weight, struct EisClass **out);

/**
 * # Safety
 * `x` is a live handle; `out` must be valid for a write.
 */
enum EisStatus eis_class_to_json(const struct EisClass *x, char **out);

/**
 * # Safety
 * Handles must be live; `out` must be valid for a write.
 */
enum EisStatus eis_class_normal_form(const struct EisConfig *cfg,
                                     const struct EisClass *x,
                                     struct EisClass **out);

/**
 * Writes 1 to `out` when the classes agree in the colimit, else 0.
 *
 * # Safety
 * Handles must be live; `out` must be valid for a write.
 */
enum EisStatus eis_class_same(const struct EisConfig *cfg,
                              const struct EisClass *a,
                              const struct EisClass *b,
                              int32_t *out);

/**
 * # Safety
 * `x` is null or a live handle from this library.
 */
void eis_class_free(struct EisClass *x);

/**
 * The class attached to a `K`-invariant function, normalized. `group` uses
 * the subgroup shorthand (`K3@9`, `full@9`, `stab:1,0@3 in K3@9`) or JSON.
 *
 * # Safety
 * Handles must be live; `group` nul-terminated; `out` valid for a write.
 */
enum EisStatus eis_parametrize(const struct EisConfig *cfg,
                               const struct EisSchwartz *phi,
                               uint32_t weight,
                               const char *group,
                               enum EisPath path,
                               struct EisClass **out);

/**
 * Runs the acceptance criteria and writes the report as JSON. `levels` may
 * be null to use the default level sets. Returns `EIS_STATUS_FAILED` (with
 * the report still written) when a criterion fails.
 *
 * # Safety
 * `cfg` is live; `levels` is null or points to `n_levels` values; `out`
 * must be valid for a write.
 */
enum EisStatus eis_selftest(const struct EisConfig *cfg,
                            const uint64_t *levels,
                            size_t n_levels,
                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EISDIST_H */
