/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef BFL_H
#define BFL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BflStatus {
  BFL_STATUS_OK = 0,
  BFL_STATUS_NULL_POINTER = 1,
  BFL_STATUS_INVALID_ARGUMENT = 2,
  BFL_STATUS_CONFIG = 3,
  BFL_STATUS_DIVERGENCE = 4,
  BFL_STATUS_THRESHOLD = 5,
  BFL_STATUS_IO = 6,
  BFL_STATUS_PANIC = 7,
} BflStatus;

/**
 * A parsed experiment configuration and its latest report.
 */
typedef struct BflExperiment BflExperiment;

/**
 * A state that can be advanced step by step.
 */
typedef struct BflSimulation BflSimulation;

/**
 * Monitored quantities of the current simulation state.
 */
typedef struct BflDiagnostics {
  double t;
  double unit_drift;
  double energy;
  double grad_norm;
  double rhs_norm;
  double rhs_dual_norm;
  double delta_norm;
  double grad_margin;
  double dual_margin;
} BflDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bfl_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next failing call.
 */
const char *bfl_last_error(void);

/**
 * Parses configuration text into a new experiment handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BflStatus bfl_experiment_parse(const char *text, struct BflExperiment **out);

/**
 * Loads a configuration file; relative `file:` paths resolve next to it.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BflStatus bfl_experiment_load(const char *path, struct BflExperiment **out);

/**
 * Runs the experiment. With a non-NULL `out_dir` the CSV and JSON files are
 * written there. `exit_code`, if not NULL, receives the command-line exit status.
 * Divergence and threshold failures still produce a report.
 *
 * # Safety
 * `exp` must come from `bfl_experiment_parse`/`bfl_experiment_load`; `out_dir`
 * must be NULL or a NUL-terminated string; `exit_code` NULL or valid.
 */
enum BflStatus bfl_experiment_run(struct BflExperiment *exp,
                                  const char *out_dir,
                                  int32_t *exit_code);

/**
 * JSON report of the last run, or NULL. Owned by the handle; valid until the next run or free.
 *
 * # Safety
 * `exp` must be NULL or a live experiment handle.
 */
const char *bfl_experiment_report_json(const struct BflExperiment *exp);

/**
 * # Safety
 * `exp` must be NULL or a handle not yet freed.
 */
void bfl_experiment_free(struct BflExperiment *exp);

/**
 * Creates a simulation at the experiment's initial state.
 *
 * # Safety
 * `exp` must be a live experiment handle and `out` a valid pointer.
 */
enum BflStatus bfl_simulation_new(const struct BflExperiment *exp, struct BflSimulation **out);

/**
 * Advances to time `t`. On divergence the simulation keeps the last finite state.
 *
 * # Safety
 * `sim` must be a live simulation handle.
 */
enum BflStatus bfl_simulation_advance(struct BflSimulation *sim, double t);

/**
 * Current time, or NaN for a NULL handle.
 *
 * # Safety
 * `sim` must be NULL or a live simulation handle.
 */
double bfl_simulation_time(const struct BflSimulation *sim);

/**
 * Number of lattice nodes, or 0 for a NULL handle.
 *
 * # Safety
 * `sim` must be NULL or a live simulation handle.
 */
size_t bfl_simulation_node_count(const struct BflSimulation *sim);

/**
 * Copies the tangent field as `x0 y0 z0 x1 ...` into `buf`; `len` counts doubles and must be at least `3 * nodes`.
 *
 * # Safety
 * `sim` must be a live simulation handle and `buf` valid for `len` doubles.
 */
enum BflStatus bfl_simulation_copy_tangent(const struct BflSimulation *sim,
                                           double *buf,
                                           size_t len);

/**
 * Copies the curve points, laid out as in [`bfl_simulation_copy_tangent`].
 *
 * # Safety
 * `sim` must be a live simulation handle and `buf` valid for `len` doubles.
 */
enum BflStatus bfl_simulation_copy_curve(const struct BflSimulation *sim, double *buf, size_t len);

/**
 * # Safety
 * `sim` must be a live simulation handle and `out` a valid pointer.
 */
enum BflStatus bfl_simulation_diagnostics(const struct BflSimulation *sim,
                                          struct BflDiagnostics *out);

/**
 * # Safety
 * `sim` must be NULL or a handle not yet freed.
 */
void bfl_simulation_free(struct BflSimulation *sim);

/**
 * Runs the randomized identity suite. `worst`, if not NULL, receives the
 * largest residual over all identities. Returns `BFL_STATUS_THRESHOLD` if any fails.
 *
 * # Safety
 * `worst` must be NULL or valid.
 */
enum BflStatus bfl_identities(uint64_t seed, size_t trials, double *worst);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BFL_H */
