#ifndef CASCADE_H
#define CASCADE_H

/* Generated by cbindgen from cascade-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum CascadeStatus {
  CASCADE_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  CASCADE_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CASCADE_STATUS_INVALID_UTF8 = 2,
  /**
   * The scenario failed to parse or validate.
   */
  CASCADE_STATUS_INVALID_SCENARIO = 3,
  /**
   * Simulation or analysis failed.
   */
  CASCADE_STATUS_RUN_FAILED = 4,
  /**
   * Filesystem error while writing artifacts.
   */
  CASCADE_STATUS_IO_FAILED = 5,
  /**
   * The stability verdict landed in the boundary band.
   */
  CASCADE_STATUS_BOUNDARY = 6,
} CascadeStatus;

/**
 * Opaque handle over a validated scenario.
 */
typedef struct CascadeScenario CascadeScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `toml_text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CascadeStatus cascade_scenario_parse(const char *toml_text, struct CascadeScenario **out);

/**
 * Loads a scenario file from `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CascadeStatus cascade_scenario_load(const char *path, struct CascadeScenario **out);

/**
 * Releases a scenario handle. NULL is a no-op.
 *
 * # Safety
 * `handle` must come from a `cascade_scenario_*` constructor and must
 * not be used afterwards.
 */
void cascade_scenario_free(struct CascadeScenario *handle);

/**
 * Seed override, applied in place of the file's seed.
 *
 * # Safety
 * `handle` must be a live scenario handle.
 */
enum CascadeStatus cascade_scenario_set_seed(struct CascadeScenario *handle, uint64_t seed);

/**
 * Runs the scenario end to end, writing artifacts under `out_dir`
 * (or the scenario's own output directory when NULL).
 *
 * # Safety
 * `handle` must be a live scenario handle; `out_dir` NULL or a
 * NUL-terminated string.
 */
enum CascadeStatus cascade_run(const struct CascadeScenario *handle, const char *out_dir);

/**
 * Stability verdict of the scenario's system as a JSON document.
 *
 * # Safety
 * `handle` must be a live scenario handle and `out_json` a valid pointer.
 */
enum CascadeStatus cascade_stability_json(const struct CascadeScenario *handle, char **out_json);

/**
 * Sweep rows (see the sweep model) as a JSON array.
 *
 * # Safety
 * `handle` must be a live scenario handle and `out_json` a valid pointer.
 */
enum CascadeStatus cascade_sweep_json(const struct CascadeScenario *handle, char **out_json);

/**
 * Releases a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void cascade_string_free(char *s);

/**
 * Detailed message of the last failure on this thread, or NULL.
 * The caller owns the returned string.
 */
char *cascade_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASCADE_H */
