#ifndef OPSPREAD_H
#define OPSPREAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum OpsStatus {
  OPS_STATUS_OK = 0,
  OPS_STATUS_NULL_POINTER = 1,
  OPS_STATUS_INVALID_ARGUMENT = 2,
  OPS_STATUS_CONFIG = 3,
  OPS_STATUS_NUMERIC = 4,
  OPS_STATUS_IO = 5,
  /**
   * Output buffer too small; the required length was still written.
   */
  OPS_STATUS_BUFFER_TOO_SMALL = 6,
  OPS_STATUS_PANIC = 7,
} OpsStatus;

/**
 * Experiment configuration handle.
 */
typedef struct OpsConfig OpsConfig;

/**
 * Results of one sweep point.
 */
typedef struct OpsRun OpsRun;

/**
 * One checkpoint of the information-gain time series. Fidelity fields are
 * NaN when the fidelity metric is disabled.
 */
typedef struct OpsMetricsRow {
  size_t n;
  double mean_fidelity;
  double fidelity_stderr;
  double entropy;
  double fisher;
  size_t rank;
  double trace_invcov;
  double log_inv_volume;
  size_t unconverged;
} OpsMetricsRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *ops_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ops_last_error_message(void);

/**
 * New configuration with default values; the seed must still be set.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum OpsStatus ops_config_new(struct OpsConfig **out);

/**
 * Parses `key = value` config text.
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is valid for writing one pointer.
 */
enum OpsStatus ops_config_parse(const char *text, struct OpsConfig **out);

/**
 * Sets one key, with the same names and syntax as the config file.
 *
 * # Safety
 * `cfg` is a live handle; `key` and `value` are NUL-terminated strings.
 */
enum OpsStatus ops_config_set(struct OpsConfig *cfg, const char *key, const char *value);

/**
 * Checks the configuration without running it.
 *
 * # Safety
 * `cfg` is a live handle.
 */
enum OpsStatus ops_config_validate(const struct OpsConfig *cfg);

/**
 * # Safety
 * `cfg` is null or a handle from this library, not used afterwards.
 */
void ops_config_free(struct OpsConfig *cfg);

/**
 * Runs the sweep point `index` at parameter `value` in memory.
 *
 * # Safety
 * `cfg` is a live handle; `out` is valid for writing one pointer.
 */
enum OpsStatus ops_run_point(const struct OpsConfig *cfg,
                             size_t index,
                             double value,
                             struct OpsRun **out);

/**
 * Runs the whole sweep and writes CSV and manifest files into `out_dir`.
 *
 * # Safety
 * `cfg` is a live handle; `out_dir` is a NUL-terminated path.
 */
enum OpsStatus ops_run_experiment(const struct OpsConfig *cfg, const char *out_dir);

/**
 * Number of checkpoints in a run.
 *
 * # Safety
 * `run` is a live handle; `len` is valid for one write.
 */
enum OpsStatus ops_run_row_count(const struct OpsRun *run, size_t *len);

/**
 * Checkpoint `i` of a run.
 *
 * # Safety
 * `run` is a live handle; `row` is valid for one write.
 */
enum OpsStatus ops_run_row(const struct OpsRun *run, size_t i, struct OpsMetricsRow *row);

/**
 * Lanczos coefficients `b_1 … b_{K−1}` of a run with Krylov output. With
 * `cap` too small, `len` still receives the count and
 * [`OpsStatus::BufferTooSmall`] is returned.
 *
 * # Safety
 * `run` is a live handle; `buf` is valid for `cap` writes; `len` is null or
 * valid for one write.
 */
enum OpsStatus ops_run_lanczos_b(const struct OpsRun *run, double *buf, size_t cap, size_t *len);

/**
 * Krylov dimension `K` of a run; 0 when Krylov output was not requested.
 *
 * # Safety
 * `run` is a live handle; `dim` is valid for one write.
 */
enum OpsStatus ops_run_krylov_dim(const struct OpsRun *run, size_t *dim);

/**
 * # Safety
 * `run` is null or a handle from this library, not used afterwards.
 */
void ops_run_free(struct OpsRun *run);

/**
 * Krylov chain of the configured observable under the configured
 * time-independent Hamiltonian at parameter `value`, without tomography.
 * Coefficients are written as in [`ops_run_lanczos_b`].
 *
 * # Safety
 * `cfg` is a live handle; `dim` is valid for one write; `buf`/`len` as in
 * [`ops_run_lanczos_b`].
 */
enum OpsStatus ops_krylov_chain(const struct OpsConfig *cfg,
                                double value,
                                size_t *dim,
                                double *buf,
                                size_t cap,
                                size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPSPREAD_H */
