#ifndef NESTED_CONFORMAL_H
#define NESTED_CONFORMAL_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NcStatus {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  NC_STATUS_INVALID_ARGUMENT = 2,
  NC_STATUS_NO_CALIBRATION_SCORES = 3,
  NC_STATUS_NOT_ENOUGH_DATA = 4,
  NC_STATUS_NO_OUT_OF_BAG_TREES = 5,
  NC_STATUS_BUFFER_TOO_SMALL = 6,
  NC_STATUS_INTERNAL = 7,
  NC_STATUS_PANIC = 8,
} NcStatus;

/**
 * Conformal methods available through the C ABI.
 */
typedef enum NcMethod {
  /**
   * Split conformal around the forest mean (half fit, half calibration).
   */
  NC_METHOD_SPLIT = 0,
  /**
   * Split conformalized quantile regression.
   */
  NC_METHOD_SPLIT_CQR = 1,
  /**
   * Out-of-bag cross-conformal around the forest mean.
   */
  NC_METHOD_OOB_CC = 2,
  /**
   * Quantile out-of-bag cross-conformal.
   */
  NC_METHOD_QOOB = 3,
  /**
   * Jackknife+ interval of the quantile out-of-bag fits.
   */
  NC_METHOD_QOOB_JP = 4,
} NcMethod;

/**
 * Shape of a prediction set.
 */
typedef enum NcSetKind {
  NC_SET_KIND_EMPTY = 0,
  NC_SET_KIND_FULL_LINE = 1,
  NC_SET_KIND_UNION = 2,
} NcSetKind;

/**
 * Opaque labeled sample.
 */
typedef struct NcDataset NcDataset;

/**
 * Opaque calibrated predictor.
 */
typedef struct NcPredictor NcPredictor;

/**
 * Fitting parameters. A `beta` of zero or less selects `2 * alpha`.
 */
typedef struct NcParams {
  double alpha;
  size_t trees;
  double beta;
  size_t min_leaf;
  uint64_t seed;
} NcParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null; do not free.
 */
const char *nc_status_message(enum NcStatus status);

/**
 * Copies `n` rows of `dim` features (row-major) and `n` targets.
 *
 * # Safety
 * `features` must be valid for `n * dim` reads, `targets` for `n` reads and
 * `out` for one write.
 */
enum NcStatus nc_dataset_new(const double *features,
                             const double *targets,
                             size_t n,
                             size_t dim,
                             struct NcDataset **out);

/**
 * # Safety
 * `data` must be null or a handle from [`nc_dataset_new`] not yet freed.
 */
void nc_dataset_free(struct NcDataset *data);

/**
 * Fits and calibrates `method` on `train`.
 *
 * # Safety
 * `method` must be one of the declared `NcMethod` values, `train` a live
 * dataset handle, `params` valid for one read and
 * `out` valid for one write.
 */
enum NcStatus nc_predictor_fit(const struct NcDataset *train,
                               enum NcMethod method,
                               const struct NcParams *params,
                               struct NcPredictor **out);

/**
 * # Safety
 * `predictor` must be null or a handle from [`nc_predictor_fit`] not yet
 * freed.
 */
void nc_predictor_free(struct NcPredictor *predictor);

/**
 * Predicts the set at one feature vector of length `dim`, which must
 * match the training data.
 *
 * # Safety
 * `predictor` must be a live handle, `x` valid for `dim` reads, `bounds`
 * valid for `2 * capacity` writes, and `out_count`, `out_kind` for one
 * write each.
 */
enum NcStatus nc_predictor_predict(const struct NcPredictor *predictor,
                                   const double *x,
                                   size_t dim,
                                   double *bounds,
                                   size_t capacity,
                                   size_t *out_count,
                                   enum NcSetKind *out_kind);

/**
 * Labels covered by total weight strictly above `threshold`, given `n`
 * closed intervals `[lo[i], hi[i]]`. A null `weights` means unit weights.
 *
 * # Safety
 * `lo` and `hi` must be valid for `n` reads, `weights` null or valid for
 * `n` reads, and the output pointers as in [`nc_predictor_predict`].
 */
enum NcStatus nc_sweep(const double *lo,
                       const double *hi,
                       const double *weights,
                       size_t n,
                       double threshold,
                       double *bounds,
                       size_t capacity,
                       size_t *out_count,
                       enum NcSetKind *out_kind);

/**
 * The `ceil((1 - alpha)(n + 1))`-th smallest of `n` scores, or `+inf` when
 * that rank exceeds `n`.
 *
 * # Safety
 * `scores` must be valid for `n` reads and `out` for one write.
 */
enum NcStatus nc_conformal_quantile(const double *scores, size_t n, double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NESTED_CONFORMAL_H */
