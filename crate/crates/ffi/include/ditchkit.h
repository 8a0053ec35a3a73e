#ifndef DITCHKIT_H
#define DITCHKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call. The numeric values match the command line exit codes.
typedef enum DkStatus {
  DK_STATUS_OK = 0,
  DK_STATUS_NULL_POINTER = 1,
  DK_STATUS_CONFIG = 2,
  DK_STATUS_NUMERIC = 3,
  DK_STATUS_IO = 4,
  DK_STATUS_INCOMPLETE_GRID = 5,
  DK_STATUS_INVALID_UTF8 = 6,
  DK_STATUS_BUFFER_TOO_SMALL = 7,
  DK_STATUS_PANIC = 8,
} DkStatus;

// Decoded DLF file.
typedef struct DkDataset DkDataset;

// Surrogate network with its normalization constants.
typedef struct DkModel DkModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dk_version(void);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`). Returns the full message length
// in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t dk_last_error(char *buf, uintptr_t len);

// Trainable parameter count of `arch` ("cjm", "cjmdd", "cjmnlb", "kae",
// "unfilter") for square patches of side `patch` and `ell` input frames.
// Patch 128 uses the full-size layer widths.
//
// # Safety
// `arch` must be a NUL-terminated string, `out` writable.
enum DkStatus dk_count_params(const char *arch, uintptr_t patch, uintptr_t ell, uint64_t *out);

// Builds a freshly initialized model. Loads are scaled with `x_min` and
// `x_max` (Pa) when predicting through [`dk_model_predict_pa`].
//
// # Safety
// `arch` must be a NUL-terminated string, `out` writable.
enum DkStatus dk_model_build(const char *arch,
                             uintptr_t patch,
                             uintptr_t ell,
                             uint64_t seed,
                             double x_min,
                             double x_max,
                             struct DkModel **out);

// Loads a DKPT checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string, `out` writable.
enum DkStatus dk_model_load(const char *path, struct DkModel **out);

// Writes a DKPT checkpoint.
//
// # Safety
// `model` must come from this library, `path` must be NUL-terminated.
enum DkStatus dk_model_save(const struct DkModel *model, const char *path);

// Patch side, input window length and trainable parameter count. Any
// output pointer may be null.
//
// # Safety
// `model` must come from this library; non-null outputs must be writable.
enum DkStatus dk_model_info(const struct DkModel *model,
                            uintptr_t *patch,
                            uintptr_t *ell,
                            uint64_t *params);

// One prediction step on normalized data. `input` holds `n` windows of
// `ell` frames (one blurred frame for the unfilter model) of `patch^2`
// row-major values; `output` receives `n * patch^2` values.
//
// # Safety
// `input` must hold `n * ell * patch^2` floats, `output` `out_len` floats.
enum DkStatus dk_model_predict(const struct DkModel *model,
                               const float *input,
                               uintptr_t n,
                               float *output,
                               uintptr_t out_len);

// As [`dk_model_predict`] with input and output in Pa, scaled with the
// model's normalization constants.
//
// # Safety
// Same as [`dk_model_predict`].
enum DkStatus dk_model_predict_pa(const struct DkModel *model,
                                  const float *input,
                                  uintptr_t n,
                                  float *output,
                                  uintptr_t out_len);

// Releases a model; null is ignored.
//
// # Safety
// `model` must be null or come from this library and not be used again.
void dk_model_free(struct DkModel *model);

// Reads a DLF file.
//
// # Safety
// `path` must be a NUL-terminated string, `out` writable.
enum DkStatus dk_dataset_read(const char *path, struct DkDataset **out);

// Number of cases and the normalization constants (Pa). Any output
// pointer may be null.
//
// # Safety
// `ds` must come from this library; non-null outputs must be writable.
enum DkStatus dk_dataset_info(const struct DkDataset *ds,
                              uintptr_t *cases,
                              double *x_min,
                              double *x_max);

// Frame count and frame shape of one case.
//
// # Safety
// `ds` must come from this library; outputs must be writable.
enum DkStatus dk_dataset_case_shape(const struct DkDataset *ds,
                                    uintptr_t case_,
                                    uintptr_t *n_t,
                                    uintptr_t *h,
                                    uintptr_t *w);

// Copies frame `t` of a case (Pa, row-major) into `out`.
//
// # Safety
// `ds` must come from this library, `out` must hold `len` floats.
enum DkStatus dk_dataset_copy_frame(const struct DkDataset *ds,
                                    uintptr_t case_,
                                    uintptr_t t,
                                    float *out,
                                    uintptr_t len);

// Releases a dataset; null is ignored.
//
// # Safety
// `ds` must be null or come from this library and not be used again.
void dk_dataset_free(struct DkDataset *ds);

// Normalized RMSE per step of `n_t` frames of `frame_len` values each,
// divided by `case_max`.
//
// # Safety
// `pred` and `truth` must hold `n_t * frame_len` floats, `out` `n_t` doubles.
enum DkStatus dk_rmse_series(const float *pred,
                             const float *truth,
                             uintptr_t n_t,
                             uintptr_t frame_len,
                             double case_max,
                             double *out);

// Parses a scenario JSON document and reports whether it validates;
// the reason for a rejection is available through [`dk_last_error`].
//
// # Safety
// `json` must be a NUL-terminated string.
enum DkStatus dk_scenario_validate(const char *json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DITCHKIT_H */
