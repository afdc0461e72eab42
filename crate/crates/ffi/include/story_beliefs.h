#ifndef STORY_BELIEFS_H
#define STORY_BELIEFS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of feature dimensions written by `sb_extractor_extract`.
 */
#define SB_FEATURE_DIMS 30

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_UTF8 = 3,
  SB_STATUS_CONFIG = 4,
  SB_STATUS_PREREQUISITE = 5,
  SB_STATUS_STAGE = 6,
  SB_STATUS_PROVIDER = 7,
  SB_STATUS_NUMERIC = 8,
  SB_STATUS_PANIC = 99,
} SbStatus;

/**
 * Opaque feature-extractor handle.
 */
typedef struct SbExtractor SbExtractor;

/**
 * Opaque pipeline handle.
 */
typedef struct SbPipeline SbPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *sb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sb_version(void);

/**
 * Componentwise mean and population variance of `n_samples` rows of `dim`
 * values. Either output may be null.
 *
 * # Safety
 * `samples` must hold `n_samples * dim` values; non-null outputs `dim`.
 */
enum SbStatus sb_beliefs(const double *samples,
                         size_t n_samples,
                         size_t dim,
                         double *out_expectation,
                         double *out_uncertainty);

/**
 * Componentwise squared difference of two expectation vectors.
 *
 * # Safety
 * All three pointers must hold `dim` values.
 */
enum SbStatus sb_surprise(const double *current, const double *previous, size_t dim, double *out);

/**
 * Mean step length of a path of `n` points.
 *
 * # Safety
 * `points` must hold `n * dim` values.
 */
enum SbStatus sb_path_speed(const double *points, size_t n, size_t dim, double *out);

/**
 * Travelled length over the shortest first-to-last path. `out_exact` (may be
 * null) is set to 1 when the shortest path was solved exactly.
 *
 * # Safety
 * `points` must hold `n * dim` values.
 */
enum SbStatus sb_path_circuitousness(const double *points,
                                     size_t n,
                                     size_t dim,
                                     double *out_ratio,
                                     int32_t *out_exact);

/**
 * Enclosing-ellipsoid volume of the path after projection onto its leading
 * principal components.
 *
 * # Safety
 * `points` must hold `n * dim` values.
 */
enum SbStatus sb_path_volume(const double *points,
                             size_t n,
                             size_t dim,
                             double tolerance,
                             double *out);

/**
 * Minimum-volume enclosing ellipsoid of `n` points: writes the centre
 * (`dim` values, may be null) and the volume.
 *
 * # Safety
 * `points` must hold `n * dim` values.
 */
enum SbStatus sb_mvee(const double *points,
                      size_t n,
                      size_t dim,
                      double tolerance,
                      double *out_center,
                      double *out_volume);

/**
 * `(l - f) / (f - b)` for baseline, feature and belief-model adjusted R².
 *
 * # Safety
 * `out` must be writable.
 */
enum SbStatus sb_relative_improvement(double baseline, double features, double full, double *out);

/**
 * Ordinary least squares. `x` is `n * k` row-major and its first column
 * must be the intercept. Coefficients and standard errors take `k` values
 * each; `out_r2` and `out_adj_r2` may be null.
 *
 * # Safety
 * Buffers must have the stated lengths.
 */
enum SbStatus sb_ols(const double *x,
                     const double *y,
                     size_t n,
                     size_t k,
                     double *out_coefficients,
                     double *out_std_errors,
                     double *out_r2,
                     double *out_adj_r2);

/**
 * Open a pipeline from a TOML config. `out_dir` may be null to keep the
 * configured output directory.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum SbStatus sb_pipeline_open(const char *config_path,
                               const char *out_dir,
                               struct SbPipeline **out);

/**
 * Run every stage in order.
 *
 * # Safety
 * `handle` must come from `sb_pipeline_open`.
 */
enum SbStatus sb_pipeline_run(struct SbPipeline *handle);

/**
 * Run one stage by name: clean, imagine, extract, beliefs or regress.
 *
 * # Safety
 * `handle` must come from `sb_pipeline_open`; `stage` must be NUL-terminated.
 */
enum SbStatus sb_pipeline_run_stage(struct SbPipeline *handle, const char *stage);

/**
 * Provider calls and cache hits made through this handle so far.
 *
 * # Safety
 * `handle` must come from `sb_pipeline_open`; outputs may be null.
 */
enum SbStatus sb_pipeline_stats(const struct SbPipeline *handle,
                                uint64_t *out_calls,
                                uint64_t *out_cache_hits);

/**
 * # Safety
 * `handle` must come from `sb_pipeline_open` and not be used afterwards.
 */
void sb_pipeline_free(struct SbPipeline *handle);

/**
 * Feature extractor using the theme model of a pipeline whose extract stage
 * has completed.
 *
 * # Safety
 * `pipeline` must be a live handle; `out` must be writable.
 */
enum SbStatus sb_extractor_from_pipeline(const struct SbPipeline *pipeline,
                                         struct SbExtractor **out);

/**
 * Extract the `SB_FEATURE_DIMS` features of a text. Dims that could not be
 * computed are written as NaN with `out_present[i] = 0`; `out_present` may
 * be null.
 *
 * # Safety
 * `out_values` (and `out_present` if non-null) must hold `SB_FEATURE_DIMS`
 * elements; `text` must be NUL-terminated UTF-8.
 */
enum SbStatus sb_extractor_extract(const struct SbExtractor *handle,
                                   const char *text,
                                   double *out_values,
                                   uint8_t *out_present);

/**
 * # Safety
 * `handle` must come from `sb_extractor_from_pipeline` and not be used
 * afterwards.
 */
void sb_extractor_free(struct SbExtractor *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STORY_BELIEFS_H */
