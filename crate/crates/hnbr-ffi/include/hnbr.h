/* C interface to the hnbr estimation core.
 *
 * All fallible functions return HnbrStatus; on failure a thread-local
 * message is retrievable with hnbr_last_error(). Handles are opaque and
 * must be released with the matching _free function exactly once.
 */

#ifndef HNBR_H
#define HNBR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum HnbrStatus {
  HNBR_OK = 0,
  HNBR_NULL_POINTER = 1,
  HNBR_INVALID_ARGUMENT = 2,
  HNBR_DIMENSION_MISMATCH = 3,
  HNBR_DATA_ERROR = 4,
  HNBR_NUMERIC_ERROR = 5,
  HNBR_BUDGET_EXCEEDED = 6,
  HNBR_PANIC = 7,
} HnbrStatus;

typedef struct HnbrDataset HnbrDataset;
typedef struct HnbrFit HnbrFit;

/* Solver options. Booleans are 0/1. Obtain defaults from
 * hnbr_fit_options_default before overriding fields. */
typedef struct HnbrFitOptions {
  double lambda1;              /* L1 level, mean block (>= 0) */
  double lambda2;              /* L1 level, dispersion block (>= 0) */
  double tol;                  /* relative objective-change tolerance */
  double kkt_tol;              /* stationarity certificate threshold */
  size_t max_iter;             /* proximal-gradient iteration cap */
  int32_t unpenalized_intercepts; /* leave constant columns unpenalized */
  int32_t standardize;         /* unit-variance column scaling */
  int32_t constant_dispersion; /* scalar dispersion (classical NB) */
  size_t extra_starts;         /* extra random restarts for cold fits */
  uint64_t seed;               /* restart RNG seed */
} HnbrFitOptions;

/* Copy the last error message on this thread into buf (NUL-terminated,
 * truncated to len bytes). Returns the full message length including the
 * terminator; 0 means no message. buf may be NULL to query the length. */
size_t hnbr_last_error(char *buf, size_t len);

/* Fill *out with the library defaults. */
HnbrStatus hnbr_fit_options_default(HnbrFitOptions *out);

/* Build a dataset from a row-major n x p design and n counts. The inputs
 * are copied. */
HnbrStatus hnbr_dataset_new(const double *x, size_t n, size_t p,
                            const uint64_t *y, HnbrDataset **out);

void hnbr_dataset_free(HnbrDataset *ds);

/* Row / feature-column counts. n or p may be NULL. */
HnbrStatus hnbr_dataset_shape(const HnbrDataset *ds, size_t *n, size_t *p);

/* Fit the double-penalized model. opts may be NULL for defaults. */
HnbrStatus hnbr_fit(const HnbrDataset *ds, const HnbrFitOptions *opts,
                    HnbrFit **out);

void hnbr_fit_free(HnbrFit *fit);

/* Feature count per coefficient block. */
HnbrStatus hnbr_fit_num_features(const HnbrFit *fit, size_t *p);

/* Copy one coefficient block (block 1 = mean, 2 = dispersion) into buf,
 * which must hold at least p doubles. */
HnbrStatus hnbr_fit_coefficients(const HnbrFit *fit, uint32_t block,
                                 double *buf, size_t len);

HnbrStatus hnbr_fit_objective(const HnbrFit *fit, double *v);

HnbrStatus hnbr_fit_kkt_residual(const HnbrFit *fit, double *v);

/* *v = 1 if the solver met its tolerances, else 0. */
HnbrStatus hnbr_fit_converged(const HnbrFit *fit, int32_t *v);

HnbrStatus hnbr_fit_iterations(const HnbrFit *fit, size_t *v);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HNBR_H */
