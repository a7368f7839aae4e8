#ifndef LPBF_TWIN_H
#define LPBF_TWIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Values 2 and 3 match the command-line exit codes.
typedef enum LpbfStatus {
  LPBF_STATUS_OK = 0,
  LPBF_STATUS_NULL_POINTER = 1,
  LPBF_STATUS_CONFIG = 2,
  LPBF_STATUS_NUMERIC = 3,
  LPBF_STATUS_INVALID_UTF8 = 4,
  LPBF_STATUS_PANIC = 5,
} LpbfStatus;

// Time-stepping thermal simulation of one scan.
typedef struct LpbfSimulation LpbfSimulation;

// Fitted width/depth surrogate.
typedef struct LpbfSurrogate LpbfSurrogate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lpbf_version(void);

// Copy the last error message of this thread into `buf` (truncated and
// NUL-terminated). Returns the full message length excluding the NUL, or 0
// when there is no error.
//
// # Safety
// `buf` must be NULL or point to `len` writable bytes.
uintptr_t lpbf_last_error(char *buf, uintptr_t len);

// Forget the last error of this thread.
void lpbf_clear_error(void);

// Run a command-line command (`"simulate"`, `"calibrate"`, ...) on a config
// file. Artifacts land in the config's output directory.
//
// # Safety
// `command` and `config_path` must be NUL-terminated strings.
enum LpbfStatus lpbf_run_command(const char *command, const char *config_path);

// Load a surrogate from its JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum LpbfStatus lpbf_surrogate_load(const char *json, struct LpbfSurrogate **out);

// Width and depth (m) at `q = (e, P1, P2, P3)`. `clamped` is set to 1 when
// the query was outside the fitted ranges.
//
// # Safety
// `h` must come from [`lpbf_surrogate_load`]; `q` must point to 4 doubles;
// the outputs must be valid pointers.
enum LpbfStatus lpbf_surrogate_predict(const struct LpbfSurrogate *h,
                                       const double *q,
                                       double *width,
                                       double *depth,
                                       int32_t *clamped);

// # Safety
// `h` must be NULL or come from [`lpbf_surrogate_load`] and not be used
// afterwards.
void lpbf_surrogate_free(struct LpbfSurrogate *h);

// Create a simulation from the JSON of a `simulate` config. Relative
// paths resolve against `base_dir` (NULL for the working directory).
//
// # Safety
// `json` must be a NUL-terminated string, `base_dir` NULL or one, and `out`
// a valid pointer.
enum LpbfStatus lpbf_simulation_new(const char *json,
                                    const char *base_dir,
                                    struct LpbfSimulation **out);

// Advance by up to `n` steps, stopping at the end of the scan path.
// `done` is set to 1 once the path is finished.
//
// # Safety
// `h` must come from [`lpbf_simulation_new`]; `done` must be valid.
enum LpbfStatus lpbf_simulation_step(struct LpbfSimulation *h, uint64_t n, int32_t *done);

// Simulated time (s) and number of steps taken.
//
// # Safety
// `h` must come from [`lpbf_simulation_new`]; outputs must be valid.
enum LpbfStatus lpbf_simulation_time(const struct LpbfSimulation *h, double *time, uint64_t *steps);

// Current melt-pool width and depth (m) in the cross-section at `x` (m).
//
// # Safety
// `h` must come from [`lpbf_simulation_new`]; outputs must be valid.
enum LpbfStatus lpbf_simulation_meltpool(const struct LpbfSimulation *h,
                                         double x,
                                         double *width,
                                         double *depth);

// Number of grid cells; the size `lpbf_simulation_temperature` expects.
//
// # Safety
// `h` must come from [`lpbf_simulation_new`].
uintptr_t lpbf_simulation_cells(const struct LpbfSimulation *h);

// Copy the temperature field (K, x fastest, then y, then z) into `buf`.
//
// # Safety
// `h` must come from [`lpbf_simulation_new`]; `buf` must hold `len` doubles.
enum LpbfStatus lpbf_simulation_temperature(const struct LpbfSimulation *h,
                                            double *buf,
                                            uintptr_t len);

// # Safety
// `h` must be NULL or come from [`lpbf_simulation_new`] and not be used
// afterwards.
void lpbf_simulation_free(struct LpbfSimulation *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPBF_TWIN_H */
