#ifndef CFAUG_H
#define CFAUG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfaugStatus {
  CFAUG_STATUS_OK = 0,
  CFAUG_STATUS_NULL_POINTER = 1,
  CFAUG_STATUS_INVALID_ARGUMENT = 2,
  CFAUG_STATUS_DIMENSION_MISMATCH = 3,
  CFAUG_STATUS_INFEASIBLE = 4,
  CFAUG_STATUS_NUMERICAL = 5,
  CFAUG_STATUS_IO = 6,
  CFAUG_STATUS_PANIC = 7,
} CfaugStatus;

typedef enum CfaugPolicy {
  /**
   * The training attribute table.
   */
  CFAUG_POLICY_KEEP = 0,
  /**
   * C uniform and independent of Y.
   */
  CFAUG_POLICY_UNIFORM = 1,
} CfaugPolicy;

typedef enum CfaugMethod {
  CFAUG_METHOD_ERM = 0,
  CFAUG_METHOD_REWEIGHT = 1,
  /**
   * `param` is the penalty weight.
   */
  CFAUG_METHOD_MMD = 2,
  /**
   * `param` is the penalty weight.
   */
  CFAUG_METHOD_IRMV1 = 3,
  /**
   * `param` is the group step size.
   */
  CFAUG_METHOD_GROUP_DRO = 4,
  CFAUG_METHOD_AUG_ORACLE = 5,
  /**
   * `param` is the corruption level in [0, 1].
   */
  CFAUG_METHOD_AUG_CORRUPT = 6,
  CFAUG_METHOD_AUG_DIFF_IN_DIFF = 7,
  CFAUG_METHOD_XSTAR_BAYES = 8,
} CfaugMethod;

typedef struct CfaugDataset CfaugDataset;

typedef struct CfaugDgp CfaugDgp;

typedef struct CfaugModel CfaugModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t cfaug_last_error(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *cfaug_version(void);

/**
 * Default Gaussian model whose P(C|Y) has I(Y;C) in `[mi_lo, mi_hi]` bits.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CfaugStatus cfaug_dgp_new(uint64_t seed, double mi_lo, double mi_hi, struct CfaugDgp **out);

/**
 * # Safety
 * `dgp` must be null or a handle from [`cfaug_dgp_new`] not yet freed.
 */
void cfaug_dgp_free(struct CfaugDgp *dgp);

/**
 * Feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `dgp` must be null or a live handle.
 */
size_t cfaug_dgp_dim(const struct CfaugDgp *dgp);

/**
 * Accuracy of the Bayes classifier restricted to the causal block.
 *
 * # Safety
 * `dgp` must be a live handle and `out` valid for a write.
 */
enum CfaugStatus cfaug_dgp_bayes_accuracy(const struct CfaugDgp *dgp, double *out);

/**
 * Samples `n` examples under `policy`.
 *
 * # Safety
 * `dgp` must be a live handle and `out` valid for a pointer write.
 */
enum CfaugStatus cfaug_dataset_sample(const struct CfaugDgp *dgp,
                                      size_t n,
                                      enum CfaugPolicy policy,
                                      uint64_t seed,
                                      struct CfaugDataset **out);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
void cfaug_dataset_free(struct CfaugDataset *ds);

/**
 * Number of examples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t cfaug_dataset_len(const struct CfaugDataset *ds);

/**
 * Copies example `index`: `x` into `x_out` (exactly `x_len` values), the
 * label and attribute into `y_out` / `c_out` (either may be null).
 *
 * # Safety
 * `ds` must be a live handle and `x_out` valid for `x_len` writes.
 */
enum CfaugStatus cfaug_dataset_get(const struct CfaugDataset *ds,
                                   size_t index,
                                   double *x_out,
                                   size_t x_len,
                                   size_t *y_out,
                                   size_t *c_out);

/**
 * Trains `method` on `train` with the default training configuration.
 * `param` is ignored by methods without a parameter.
 *
 * # Safety
 * Handles must be live and `out` valid for a pointer write.
 */
enum CfaugStatus cfaug_fit(const struct CfaugDgp *dgp,
                           const struct CfaugDataset *train,
                           enum CfaugMethod method,
                           double param,
                           uint64_t seed,
                           struct CfaugModel **out);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
void cfaug_model_free(struct CfaugModel *model);

/**
 * Number of weights, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t cfaug_model_dim(const struct CfaugModel *model);

/**
 * Copies the weights (exactly `len` values) and the bias.
 *
 * # Safety
 * `model` must be live, `weights` valid for `len` writes, `bias` for one.
 */
enum CfaugStatus cfaug_model_params(const struct CfaugModel *model,
                                    double *weights,
                                    size_t len,
                                    double *bias);

/**
 * `P(Y = 1 | x)` for one feature vector of length `len`.
 *
 * # Safety
 * `model` must be live, `x` valid for `len` reads, `out` for one write.
 */
enum CfaugStatus cfaug_model_predict_proba(const struct CfaugModel *model,
                                           const double *x,
                                           size_t len,
                                           double *out);

/**
 * Accuracy of `model` on `ds`.
 *
 * # Safety
 * Handles must be live and `out` valid for a write.
 */
enum CfaugStatus cfaug_model_accuracy(const struct CfaugModel *model,
                                      const struct CfaugDataset *ds,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CFAUG_H */
