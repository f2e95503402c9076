#ifndef L1PCA_H
#define L1PCA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum L1pcaStatus {
  L1PCA_STATUS_OK = 0,
  L1PCA_STATUS_NULL_POINTER = 1,
  L1PCA_STATUS_INVALID_INPUT = 2,
  L1PCA_STATUS_DIMENSION_MISMATCH = 3,
  L1PCA_STATUS_PRECONDITION = 4,
  L1PCA_STATUS_INVALID_CONFIG = 5,
  L1PCA_STATUS_THEOREM_CONDITION = 6,
  L1PCA_STATUS_DIVERGED = 7,
  L1PCA_STATUS_DEGENERATE_UPDATE = 8,
  L1PCA_STATUS_REFUSED = 9,
  L1PCA_STATUS_UNDEFINED_METRIC = 10,
  L1PCA_STATUS_PARSE = 11,
  L1PCA_STATUS_IO = 12,
  L1PCA_STATUS_BUFFER_TOO_SMALL = 13,
  L1PCA_STATUS_PANIC = 14,
} L1pcaStatus;

/**
 * Values accepted in [`L1pcaOptions::method`].
 */
typedef enum L1pcaMethod {
  L1PCA_METHOD_PAME = 0,
  L1PCA_METHOD_PAM = 1,
  L1PCA_METHOD_FPM = 2,
  L1PCA_METHOD_PDCAE = 3,
  L1PCA_METHOD_IPALM = 4,
  L1PCA_METHOD_GIPALM = 5,
} L1pcaMethod;

/**
 * A data matrix (`d × n`, samples in columns) and a target dimension `K`.
 */
typedef struct L1pcaProblem L1pcaProblem;

/**
 * Final iterates and trace of one solver run.
 */
typedef struct L1pcaResult L1pcaResult;

/**
 * Solver settings. Fill with [`l1pca_options_default`] before editing.
 * `alpha_star` and `beta_star` at or below zero select their defaults.
 */
typedef struct L1pcaOptions {
  uint32_t method;
  double alpha;
  double beta;
  double gamma;
  double alpha_star;
  double beta_star;
  double tol;
  size_t max_iter;
  uint64_t seed;
  bool theorem_mode;
} L1pcaOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *l1pca_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *l1pca_version(void);

/**
 * Default settings for `method` (an [`L1pcaMethod`] value).
 *
 * # Safety
 * `out` must be null or point to writable memory for one `L1pcaOptions`.
 */
enum L1pcaStatus l1pca_options_default(uint32_t method, struct L1pcaOptions *out);

/**
 * Problem from a column-major `rows × cols` array (`d × n`, samples in columns).
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles and `out` to a
 * writable handle slot.
 */
enum L1pcaStatus l1pca_problem_new_dense(const double *data,
                                         size_t rows,
                                         size_t cols,
                                         size_t k,
                                         struct L1pcaProblem **out);

/**
 * Problem read from a file: `.bin` dense binary, otherwise sparse labeled text.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum L1pcaStatus l1pca_problem_from_file(const char *path, size_t k, struct L1pcaProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from this library not yet freed.
 */
void l1pca_problem_free(struct L1pcaProblem *problem);

/**
 * Writes `d`, `n` and `K`; any output pointer may be null.
 *
 * # Safety
 * `problem` must be a live handle; non-null outputs must be writable.
 */
enum L1pcaStatus l1pca_problem_dims(const struct L1pcaProblem *problem,
                                    size_t *d,
                                    size_t *n,
                                    size_t *k);

/**
 * Runs the configured solver from the start point seeded by `options.seed`.
 * Reaching `max_iter` is not an error; check [`l1pca_result_converged`].
 *
 * # Safety
 * `problem` and `options` must be valid; `out` a writable handle slot.
 */
enum L1pcaStatus l1pca_solve(const struct L1pcaProblem *problem,
                             const struct L1pcaOptions *options,
                             struct L1pcaResult **out);

/**
 * # Safety
 * `result` must be null or a handle from this library not yet freed.
 */
void l1pca_result_free(struct L1pcaResult *result);

/**
 * Iterations performed; 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t l1pca_result_iterations(const struct L1pcaResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
bool l1pca_result_converged(const struct L1pcaResult *result);

/**
 * `‖XᵀQ‖₁` at the final iterate; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double l1pca_result_objective(const struct L1pcaResult *result);

/**
 * Copies the final `Q` (`d × K`, column-major) into `out`.
 *
 * # Safety
 * `result` must be a live handle and `out` point to `len` writable doubles.
 */
enum L1pcaStatus l1pca_result_q(const struct L1pcaResult *result, double *out, size_t len);

/**
 * Copies the final sign matrix `P` (`n × K`, column-major) into `out`.
 *
 * # Safety
 * `result` must be a live handle and `out` point to `len` writable doubles.
 */
enum L1pcaStatus l1pca_result_p(const struct L1pcaResult *result, double *out, size_t len);

/**
 * Number of trace records (iterations plus the start point).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t l1pca_result_trace_len(const struct L1pcaResult *result);

/**
 * Copies the `h` value of every trace record into `out`.
 *
 * # Safety
 * `result` must be a live handle and `out` point to `len` writable doubles.
 */
enum L1pcaStatus l1pca_result_h_values(const struct L1pcaResult *result, double *out, size_t len);

/**
 * Total explained variation of the final `Q` on `problem`.
 *
 * # Safety
 * `problem` and `result` must be live handles; `out` writable.
 */
enum L1pcaStatus l1pca_tev(const struct L1pcaProblem *problem,
                           const struct L1pcaResult *result,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* L1PCA_H */
