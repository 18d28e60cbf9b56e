#ifndef PMNN_H
#define PMNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define PMNN_OK 0

#define PMNN_ERR_NULL -1

#define PMNN_ERR_UTF8 -2

#define PMNN_ERR_CONFIG -3

#define PMNN_ERR_NUMERIC -4

#define PMNN_ERR_IO -5

#define PMNN_ERR_UNAVAILABLE -6

#define PMNN_ERR_ARGUMENT -7

#define PMNN_ERR_PANIC -8

/**
 * A finished training run.
 */
typedef struct PmnnRun PmnnRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pmnn_last_error(void);

/**
 * Trains a registry experiment. `profile` and `out_dir` may be null for
 * `"full"` and `"runs"`. A negative `seed` keeps the configured seed.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
int32_t pmnn_run_registry(const char *name,
                          const char *profile,
                          const char *out_dir,
                          int64_t seed,
                          struct PmnnRun **out);

/**
 * Trains an experiment described by TOML text.
 *
 * # Safety
 * As for [`pmnn_run_registry`].
 */
int32_t pmnn_run_config(const char *toml,
                        const char *profile,
                        const char *out_dir,
                        struct PmnnRun **out);

/**
 * Estimated eigenvalue of the unshifted operator.
 *
 * # Safety
 * `run` must come from this library and `out` must be writable.
 */
int32_t pmnn_run_lambda(const struct PmnnRun *run, double *out);

/**
 * Relative eigenvalue error; `PMNN_ERR_UNAVAILABLE` without a reference.
 *
 * # Safety
 * As for [`pmnn_run_lambda`].
 */
int32_t pmnn_run_relative_error(const struct PmnnRun *run, double *out);

/**
 * Spatial dimension of the run's problem.
 *
 * # Safety
 * As for [`pmnn_run_lambda`].
 */
int32_t pmnn_run_dim(const struct PmnnRun *run, uintptr_t *out);

/**
 * Evaluates the trained eigenfunction (unnormalized) at `n` row-major
 * points of width `dim`, writing `n` values into `values`.
 *
 * # Safety
 * `points` must hold `n * dim` doubles and `values` room for `n`.
 */
int32_t pmnn_run_eigenfunction(const struct PmnnRun *run,
                               const double *points,
                               uintptr_t n,
                               uintptr_t dim,
                               double *values);

/**
 * Smallest eigenvalue of the finite-difference `-Δ` on the unit square or
 * interval with `n_h` interior nodes per axis, by inverse iteration.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t pmnn_fdm_ground_eigenvalue(uintptr_t dim, uintptr_t n_h, double *out);

/**
 * Releases a run. Null is ignored.
 *
 * # Safety
 * `run` must be null or an unreleased handle from this library.
 */
void pmnn_run_free(struct PmnnRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMNN_H */
