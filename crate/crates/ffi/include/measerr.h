#ifndef MEASERR_H
#define MEASERR_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MeStatus {
  ME_STATUS_OK = 0,
  ME_STATUS_NULL_POINTER = 1,
  ME_STATUS_INVALID_ARGUMENT = 2,
  ME_STATUS_IO = 3,
  ME_STATUS_PARSE = 4,
  ME_STATUS_COLUMN_NOT_FOUND = 5,
  ME_STATUS_SINGULAR = 6,
  ME_STATUS_INSUFFICIENT_DATA = 7,
  ME_STATUS_INFEASIBLE = 8,
  ME_STATUS_BOOTSTRAP_FAILED = 9,
  ME_STATUS_PANIC = 10,
} MeStatus;

typedef enum MeExtrapolant {
  ME_EXTRAPOLANT_LINEAR = 0,
  ME_EXTRAPOLANT_QUADRATIC = 1,
} MeExtrapolant;

typedef enum MeCorrector {
  ME_CORRECTOR_RC = 0,
  ME_CORRECTOR_SIMEX = 1,
} MeCorrector;

typedef enum MeDistKind {
  ME_DIST_KIND_UNIFORM = 0,
  ME_DIST_KIND_TRIANGULAR = 1,
  ME_DIST_KIND_TRAPEZOIDAL = 2,
} MeDistKind;

/**
 * Opaque column-role assignment.
 */
typedef struct MeAnalysis MeAnalysis;

/**
 * Opaque numeric table.
 */
typedef struct MeDataset MeDataset;

/**
 * Exposure row of an OLS fit.
 */
typedef struct MeFit {
  double estimate;
  double std_error;
  double residual_variance;
  double r_squared;
  size_t n;
  size_t p;
} MeFit;

/**
 * SIMEX settings. `lambdas` may be NULL to use the default grid
 * 0, 0.5, 1, 1.5, 2.
 */
typedef struct MeSimexConfig {
  const double *lambdas;
  size_t n_lambdas;
  size_t n_sim;
  enum MeExtrapolant extrapolant;
  uint64_t seed;
} MeSimexConfig;

/**
 * Prior over the error variance. A triangular prior uses `lower_mode` as
 * its mode; a uniform prior ignores both modes.
 */
typedef struct MeDistribution {
  enum MeDistKind kind;
  double min;
  double lower_mode;
  double upper_mode;
  double max;
} MeDistribution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or an empty
 * string. The pointer stays valid until the next call on the same thread.
 */
const char *measerr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *measerr_version(void);

/**
 * Builds a dataset from `n_cols` named columns of `n_rows` values each,
 * stored column-major in `values`.
 *
 * # Safety
 * `names` must point to `n_cols` NUL-terminated strings and `values` to
 * `n_rows * n_cols` doubles. `out` must be writable.
 */
enum MeStatus measerr_dataset_new(const char *const *names,
                                  const double *values,
                                  size_t n_rows,
                                  size_t n_cols,
                                  struct MeDataset **out_dataset);

/**
 * Loads a headered numeric CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_dataset` writable.
 */
enum MeStatus measerr_dataset_load_csv(const char *path, struct MeDataset **out_dataset);

/**
 * Number of rows, or 0 for a NULL handle.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t measerr_dataset_n_rows(const struct MeDataset *dataset);

/**
 * # Safety
 * `dataset` must be NULL or a handle not yet freed.
 */
void measerr_dataset_free(struct MeDataset *dataset);

/**
 * Assigns column roles. The first replicate is the analysed exposure.
 *
 * # Safety
 * String arguments must be NUL-terminated; the list pointers must hold the
 * stated number of entries (they may be NULL when the count is 0).
 */
enum MeStatus measerr_analysis_new(const char *outcome,
                                   const char *const *replicates,
                                   size_t n_replicates,
                                   const char *const *covariates,
                                   size_t n_covariates,
                                   struct MeAnalysis **out_analysis);

/**
 * # Safety
 * `analysis` must be NULL or a handle not yet freed.
 */
void measerr_analysis_free(struct MeAnalysis *analysis);

/**
 * Mean within-row variance of the replicate columns.
 *
 * # Safety
 * Handles must be live; `out_tau2` writable.
 */
enum MeStatus measerr_estimate_tau2(const struct MeDataset *dataset,
                                    const struct MeAnalysis *analysis,
                                    double *out_tau2);

/**
 * OLS of the outcome on the first replicate and the covariates.
 *
 * # Safety
 * Handles must be live; `out_fit` writable.
 */
enum MeStatus measerr_fit_uncorrected(const struct MeDataset *dataset,
                                      const struct MeAnalysis *analysis,
                                      struct MeFit *out_fit);

/**
 * Regression calibration with a known `tau2`. `out_factor` may be NULL.
 *
 * # Safety
 * Handles must be live; `out_estimate` writable.
 */
enum MeStatus measerr_correct_rc(const struct MeDataset *dataset,
                                 const struct MeAnalysis *analysis,
                                 double tau2,
                                 double *out_estimate,
                                 double *out_factor);

/**
 * SIMEX with a known `tau2`. `config` may be NULL for defaults.
 *
 * # Safety
 * Handles must be live; `config` NULL or valid; `out_estimate` writable.
 */
enum MeStatus measerr_correct_simex(const struct MeDataset *dataset,
                                    const struct MeAnalysis *analysis,
                                    double tau2,
                                    const struct MeSimexConfig *config,
                                    double *out_estimate);

/**
 * Percentile bootstrap interval. When `tau2_from_replicates` is true, τ² is
 * re-estimated from the replicate columns in every resample and `tau2` is
 * ignored.
 *
 * # Safety
 * Handles must be live; `config` NULL or valid; out pointers writable.
 */
enum MeStatus measerr_bootstrap_ci(const struct MeDataset *dataset,
                                   const struct MeAnalysis *analysis,
                                   enum MeCorrector method,
                                   double tau2,
                                   bool tau2_from_replicates,
                                   const struct MeSimexConfig *config,
                                   size_t n_boot,
                                   double level,
                                   uint64_t seed,
                                   double *out_lower,
                                   double *out_upper);

/**
 * Writes `m` inverse-CDF draws from `dist` into `out_draws`.
 *
 * # Safety
 * `dist` must be valid and `out_draws` must have room for `m` doubles.
 */
enum MeStatus measerr_sample_tau2(const struct MeDistribution *dist,
                                  size_t m,
                                  uint64_t seed,
                                  double *out_draws);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEASERR_H */
