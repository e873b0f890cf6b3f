/* C interface for pursuitlab, the sparse-recovery laboratory. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of a fallible call.
 */
typedef enum PursuitStatus {
  PURSUIT_STATUS_OK = 0,
  PURSUIT_STATUS_NULL_POINTER = 1,
  PURSUIT_STATUS_INVALID_ARGUMENT = 2,
  PURSUIT_STATUS_UTF8_ERROR = 3,
  PURSUIT_STATUS_IO_ERROR = 4,
  PURSUIT_STATUS_RUNTIME_ERROR = 5,
} PursuitStatus;

/**
 * Opaque measurement problem: matrix, observation, optional ground
 * truth.
 */
typedef struct PursuitInstance PursuitInstance;

/**
 * Opaque recovery outcome.
 */
typedef struct PursuitRecovery PursuitRecovery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the most recent failure on this thread into
 * `buffer` (NUL-terminated, truncated to `len`). Returns the full
 * message length including the terminator; call with a null buffer to
 * size one.
 *
 * # Safety
 * A non-null `buffer` must be writable for `len` bytes.
 */
size_t pursuit_last_error(char *buffer, size_t len);

/**
 * Generates a seeded instance: an `m x n` Gaussian measurement matrix,
 * an `s`-sparse signal of the named kind ("gaussian" or "cars"), and the
 * observation (noiseless when `noise_level` is zero).
 *
 * # Safety
 * `signal_kind` must be a valid NUL-terminated string and `out` a valid
 * destination pointer.
 */
enum PursuitStatus pursuit_instance_generate(uint32_t m,
                                             uint32_t n,
                                             uint32_t s,
                                             const char *signal_kind,
                                             double noise_level,
                                             uint64_t master_seed,
                                             uint64_t stream_id,
                                             struct PursuitInstance **out);

/**
 * Loads an instance container written by `pursuit_instance_save` or the
 * CLI.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * destination pointer.
 */
enum PursuitStatus pursuit_instance_load(const char *path, struct PursuitInstance **out);

/**
 * Writes the instance container to `path`.
 *
 * # Safety
 * `inst` must be a live handle and `path` a valid NUL-terminated string.
 */
enum PursuitStatus pursuit_instance_save(const struct PursuitInstance *inst, const char *path);

/**
 * Reports the dimensions and ground-truth sparsity (0 when the instance
 * carries no truth). Null output pointers are skipped.
 *
 * # Safety
 * `inst` must be a live handle; non-null outputs must be writable.
 */
enum PursuitStatus pursuit_instance_dims(const struct PursuitInstance *inst,
                                         uint32_t *m,
                                         uint32_t *n,
                                         uint32_t *s);

/**
 * Releases an instance handle. Null is ignored.
 *
 * # Safety
 * `inst` must come from this library and not be freed twice.
 */
void pursuit_instance_free(struct PursuitInstance *inst);

/**
 * Runs one recovery. `algorithm` uses the mini-grammar of the CLI
 * (`"stp:mu=2.5"`, `"sp"`, `"l1"`, ...); `sparsity` zero means "use the
 * ground-truth sparsity"; `max_iterations` zero selects the default
 * budget (200) and `residual_tolerance` at or below zero the default
 * 1e-10.
 *
 * # Safety
 * `inst` must be a live handle, `algorithm` a valid NUL-terminated
 * string, and `out` a valid destination pointer.
 */
enum PursuitStatus pursuit_recover(const struct PursuitInstance *inst,
                                   const char *algorithm,
                                   uint32_t sparsity,
                                   uint32_t max_iterations,
                                   double residual_tolerance,
                                   struct PursuitRecovery **out);

/**
 * Number of iterations the run committed.
 *
 * # Safety
 * `rec` must be a live handle.
 */
uint32_t pursuit_recovery_iterations(const struct PursuitRecovery *rec);

/**
 * Whether the residual criterion was met.
 *
 * # Safety
 * `rec` must be a live handle.
 */
bool pursuit_recovery_converged(const struct PursuitRecovery *rec);

/**
 * Final residual norm `||y - Phi x||`.
 *
 * # Safety
 * `rec` must be a live handle.
 */
double pursuit_recovery_residual_norm(const struct PursuitRecovery *rec);

/**
 * Copies the length-N estimate into `buffer` (which must hold exactly N
 * doubles; query N via `pursuit_instance_dims`).
 *
 * # Safety
 * `rec` must be a live handle and `buffer` writable for `len` doubles.
 */
enum PursuitStatus pursuit_recovery_estimate(const struct PursuitRecovery *rec,
                                             double *buffer,
                                             size_t len);

/**
 * Relative l2 error of the estimate against the instance's ground
 * truth.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum PursuitStatus pursuit_recovery_relative_error(const struct PursuitRecovery *rec,
                                                   const struct PursuitInstance *inst,
                                                   double *out);

/**
 * Releases a recovery handle. Null is ignored.
 *
 * # Safety
 * `rec` must come from this library and not be freed twice.
 */
void pursuit_recovery_free(struct PursuitRecovery *rec);

/**
 * Contraction factor of the thresholding-pursuit error recursion; NaN
 * when the arguments are out of range.
 */
double pursuit_theory_rho(double mu, double delta);

/**
 * Noise amplification constant; NaN when undefined (no contraction).
 */
double pursuit_theory_tau(double mu, double delta);

/**
 * Largest isometry constant with a contracting recursion at weight
 * `mu`; NaN when `mu` is out of range.
 */
double pursuit_theory_delta_max(double mu);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
