#ifndef PLSE_H
#define PLSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every exported function.
 */
typedef enum {
  PLSE_STATUS_OK = 0,
  PLSE_STATUS_NULL_POINTER = 1,
  PLSE_STATUS_INVALID_ARGUMENT = 2,
  PLSE_STATUS_DIMENSION_MISMATCH = 3,
  PLSE_STATUS_JSON = 4,
  PLSE_STATUS_SINGULAR = 5,
  PLSE_STATUS_DIVERGENCE = 6,
  PLSE_STATUS_PANIC = 7,
} PlseStatus;

/**
 * Result of a fit.
 */
typedef struct PlseFit PlseFit;

/**
 * Penalty resolved for a fixed problem size.
 */
typedef struct PlsePenalty PlsePenalty;

/**
 * Design matrix and response.
 */
typedef struct PlseProblem PlseProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *plse_last_error_message(void);

/**
 * Builds a problem from an `n × p` column-major matrix `x` and a response of
 * length `n`. Columns must satisfy `‖X_j‖² = n`.
 *
 * # Safety
 * `x` must point to `n * p` doubles, `y` to `n` doubles, `out` must be writable.
 */
PlseStatus plse_problem_new(const double *x,
                            size_t n,
                            size_t p,
                            const double *y,
                            PlseProblem **out);

/**
 * # Safety
 * `problem` must be NULL or a handle from [`plse_problem_new`] not yet freed.
 */
void plse_problem_free(PlseProblem *problem);

/**
 * Parses a penalty JSON document and resolves its levels for size `(n, p)`.
 *
 * # Safety
 * `json` must be a NUL-terminated string, `out` must be writable.
 */
PlseStatus plse_penalty_from_json(const char *json, size_t n, size_t p, PlsePenalty **out);

/**
 * # Safety
 * `penalty` must be NULL or a handle from [`plse_penalty_from_json`] not yet freed.
 */
void plse_penalty_free(PlsePenalty *penalty);

/**
 * Fits the penalized estimator. `solver_json` may be NULL for defaults.
 * A fit that hits its iteration limit still succeeds; query
 * [`plse_fit_converged`].
 *
 * # Safety
 * Handles must be live, `solver_json` NULL or NUL-terminated, `out` writable.
 */
PlseStatus plse_fit(const PlseProblem *problem,
                    const PlsePenalty *penalty,
                    const char *solver_json,
                    PlseFit **out);

/**
 * # Safety
 * `fit` must be NULL or a handle from [`plse_fit`] not yet freed.
 */
void plse_fit_free(PlseFit *fit);

/**
 * Writes the number of coefficients to `out`.
 *
 * # Safety
 * `fit` must be live and `out` writable.
 */
PlseStatus plse_fit_len(const PlseFit *fit, size_t *out);

/**
 * Copies the coefficient vector into `out`, which must hold exactly `len` doubles.
 *
 * # Safety
 * `fit` must be live and `out` must point to `len` writable doubles.
 */
PlseStatus plse_fit_beta(const PlseFit *fit, double *out, size_t len);

/**
 * Writes the sup-norm of the stationarity residual to `out`.
 *
 * # Safety
 * `fit` must be live and `out` writable.
 */
PlseStatus plse_fit_kkt_inf(const PlseFit *fit, double *out);

/**
 * Writes whether the solver met its tolerances to `out`.
 *
 * # Safety
 * `fit` must be live and `out` writable.
 */
PlseStatus plse_fit_converged(const PlseFit *fit, bool *out);

/**
 * Serializes the fit to JSON. Release the string with [`plse_string_free`].
 *
 * # Safety
 * `fit` must be live and `out` writable.
 */
PlseStatus plse_fit_to_json(const PlseFit *fit, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library not yet freed.
 */
void plse_string_free(char *s);

/**
 * Proximal map of `step · ρ#` convexified by `kappa`. Pass NaN for `kappa`
 * to use the family's own concavity bound. `x` and `out` hold `len` doubles
 * and may alias.
 *
 * # Safety
 * `penalty` must be live; `x` readable and `out` writable for `len` doubles.
 */
PlseStatus plse_sorted_prox(const PlsePenalty *penalty,
                            const double *x,
                            size_t len,
                            double step,
                            double kappa,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLSE_H */
