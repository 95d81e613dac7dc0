#ifndef STRATMEAN_H
#define STRATMEAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum StratmeanStatus {
  STRATMEAN_STATUS_OK = 0,
  STRATMEAN_STATUS_NULL_POINTER = 1,
  STRATMEAN_STATUS_INVALID_UTF8 = 2,
  STRATMEAN_STATUS_INPUT = 3,
  STRATMEAN_STATUS_NUMERICAL = 4,
  STRATMEAN_STATUS_VALIDATION = 5,
  STRATMEAN_STATUS_BUFFER_TOO_SMALL = 6,
  STRATMEAN_STATUS_PANIC = 7,
} StratmeanStatus;

typedef enum StratmeanPolicy {
  STRATMEAN_POLICY_PREFER_CORRELATION = 0,
  STRATMEAN_POLICY_PREFER_COVARIANCE = 1,
  STRATMEAN_POLICY_STRICT = 2,
} StratmeanPolicy;

typedef enum StratmeanEstimator {
  STRATMEAN_ESTIMATOR_MEAN = 0,
  STRATMEAN_ESTIMATOR_T1 = 1,
  STRATMEAN_ESTIMATOR_T2 = 2,
  STRATMEAN_ESTIMATOR_T3 = 3,
  STRATMEAN_ESTIMATOR_T4 = 4,
  STRATMEAN_ESTIMATOR_T5 = 5,
  STRATMEAN_ESTIMATOR_T6 = 6,
  STRATMEAN_ESTIMATOR_T7 = 7,
  STRATMEAN_ESTIMATOR_TP = 8,
} StratmeanEstimator;

/*
 A reconciled population summary with its sample design and moments.
 */
typedef struct StratmeanModel StratmeanModel;

/*
 A finished Monte Carlo run.
 */
typedef struct StratmeanSimulation StratmeanSimulation;

/*
 Relative second moments of the sampling design.
 */
typedef struct StratmeanMoments {
  double v200;
  double v020;
  double v002;
  double v110;
  double v101;
  double v011;
  double mean_y;
  double mean_x;
  double mean_z;
  /*
   0 in a census, where `b1` and `b2` are undefined and set to NaN.
   */
  int32_t has_coefficients;
  double b1;
  double b2;
  double regression_residual;
} StratmeanMoments;

typedef struct StratmeanPreRow {
  enum StratmeanEstimator estimator;
  double mse;
  /*
   NaN when the MSE is zero.
   */
  double pre;
  size_t rank;
} StratmeanPreRow;

typedef struct StratmeanSimRow {
  enum StratmeanEstimator estimator;
  /*
   Tuning exponents of a `tp` row, NaN otherwise.
   */
  double m1;
  double m2;
  double empirical_mean;
  double empirical_bias;
  double empirical_mse;
  double theoretical_mse;
  double relative_gap;
  size_t non_finite;
} StratmeanSimRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next library call on the same thread.
 */
const char *stratmean_last_error(void);

/*
 Builds a model from a summary JSON document (`{"strata": [...], "n_h": [...]}`).

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum StratmeanStatus stratmean_model_from_json(const char *json,
                                               enum StratmeanPolicy policy,
                                               struct StratmeanModel **out);

/*
 Builds a model from the embedded school dataset and its published design.

 # Safety
 `out` must be writable.
 */
enum StratmeanStatus stratmean_model_embedded(enum StratmeanPolicy policy,
                                              struct StratmeanModel **out);

/*
 # Safety
 `model` must come from a `stratmean_model_*` constructor, or be NULL.
 */
void stratmean_model_free(struct StratmeanModel *model);

/*
 Number of covariance entries repaired or imputed while building the model.

 # Safety
 `model` must be a live handle.
 */
size_t stratmean_model_repairs(const struct StratmeanModel *model);

/*
 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum StratmeanStatus stratmean_moments(const struct StratmeanModel *model,
                                       struct StratmeanMoments *out);

/*
 First-order MSE of one estimator. `m1` and `m2` are used for `tp` only.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum StratmeanStatus stratmean_mse(const struct StratmeanModel *model,
                                   enum StratmeanEstimator estimator,
                                   double m1,
                                   double m2,
                                   double *out);

/*
 Optimal `(m1, m2)` of `tp` and the MSE there.

 # Safety
 `model` must be a live handle; the outputs must be writable.
 */
enum StratmeanStatus stratmean_optimal_m(const struct StratmeanModel *model,
                                         double *m1,
                                         double *m2,
                                         double *min_mse);

/*
 Writes the nine PRE rows (mean, t1..t7, tp) into `rows`.

 # Safety
 `rows` must have room for `capacity` elements; `written` must be writable.
 */
enum StratmeanStatus stratmean_pre_table(const struct StratmeanModel *model,
                                         struct StratmeanPreRow *rows,
                                         size_t capacity,
                                         size_t *written);

/*
 Monte Carlo on the reference three-stratum population generated from
 `seed`, with `replications` replications seeded from the same value.

 # Safety
 `out` must be writable.
 */
enum StratmeanStatus stratmean_simulate_reference(uint64_t seed,
                                                  size_t replications,
                                                  struct StratmeanSimulation **out);

/*
 # Safety
 `sim` must come from [`stratmean_simulate_reference`], or be NULL.
 */
void stratmean_simulation_free(struct StratmeanSimulation *sim);

/*
 # Safety
 `sim` must be a live handle.
 */
size_t stratmean_simulation_len(const struct StratmeanSimulation *sim);

/*
 # Safety
 `sim` must be a live handle; `out` must be writable.
 */
enum StratmeanStatus stratmean_simulation_row(const struct StratmeanSimulation *sim,
                                              size_t index,
                                              struct StratmeanSimRow *out);

/*
 The full simulation report as JSON. Free with [`stratmean_string_free`].

 # Safety
 `sim` must be a live handle; `out` must be writable.
 */
enum StratmeanStatus stratmean_simulation_json(const struct StratmeanSimulation *sim, char **out);

/*
 # Safety
 `s` must come from this library, or be NULL.
 */
void stratmean_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRATMEAN_H */
