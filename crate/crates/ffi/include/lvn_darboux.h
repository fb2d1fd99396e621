#ifndef LVN_DARBOUX_H
#define LVN_DARBOUX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LvnStatus {
  LVN_STATUS_OK = 0,
  LVN_STATUS_NULL_POINTER = 1,
  LVN_STATUS_INVALID_ARGUMENT = 2,
  LVN_STATUS_VALIDATION = 3,
  LVN_STATUS_NUMERICAL = 4,
  LVN_STATUS_IO = 5,
  LVN_STATUS_PARSE = 6,
  LVN_STATUS_UNKNOWN_SCENARIO = 7,
  LVN_STATUS_BUFFER_TOO_SMALL = 8,
  LVN_STATUS_PANIC = 9,
} LvnStatus;

typedef enum LvnMode {
  LVN_MODE_EVOLVE = 0,
  LVN_MODE_VERIFY = 1,
  LVN_MODE_SUBSYSTEM = 2,
} LvnMode;

typedef enum LvnFormat {
  LVN_FORMAT_CSV = 0,
  LVN_FORMAT_JSON = 1,
} LvnFormat;

/**
 * Opaque scenario handle.
 */
typedef struct LvnScenario LvnScenario;

/**
 * Opaque handle to a prepared closed-form solution.
 */
typedef struct LvnSolution LvnSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lvn_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *lvn_last_error(void);

/**
 * Looks up a builtin scenario (`ex51` ... `ex56`).
 */
enum LvnStatus lvn_scenario_builtin(const char *name, struct LvnScenario **out);

/**
 * Reads and validates a scenario file.
 */
enum LvnStatus lvn_scenario_load(const char *path, struct LvnScenario **out);

/**
 * Parses and validates a scenario from JSON text.
 */
enum LvnStatus lvn_scenario_from_json(const char *json, struct LvnScenario **out);

/**
 * Matrix dimension of the scenario.
 */
enum LvnStatus lvn_scenario_dim(const struct LvnScenario *scenario, size_t *out_dim);

void lvn_scenario_free(struct LvnScenario *scenario);

/**
 * Prepares the closed-form solution of a scenario.
 */
enum LvnStatus lvn_solution_new(const struct LvnScenario *scenario, struct LvnSolution **out);

void lvn_solution_free(struct LvnSolution *solution);

enum LvnStatus lvn_solution_dim(const struct LvnSolution *solution, size_t *out_dim);

/**
 * Writes the solution at `t` into `out` as row-major interleaved
 * `(re, im)` pairs. `out_len` counts doubles and must be at least `2 n^2`.
 */
enum LvnStatus lvn_solution_evaluate(const struct LvnSolution *solution,
                                     double t,
                                     double *out,
                                     size_t out_len);

/**
 * `F(t)` of the first transformation; may be `inf` where only its logarithm is finite.
 */
enum LvnStatus lvn_solution_f(const struct LvnSolution *solution, double t, double *out);

/**
 * `ln F(t)`, finite wherever `F` is.
 */
enum LvnStatus lvn_solution_ln_f(const struct LvnSolution *solution, double t, double *out);

/**
 * Runs a scenario on its grid and writes the output atomically to `path`.
 * `out_passed` (optional) receives 0 when verify mode found a tolerance
 * failure and 1 otherwise.
 */
enum LvnStatus lvn_run_to_file(const struct LvnScenario *scenario,
                               enum LvnMode mode,
                               enum LvnFormat format,
                               const char *path,
                               int *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LVN_DARBOUX_H */
