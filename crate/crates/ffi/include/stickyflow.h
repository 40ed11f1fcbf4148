#ifndef STICKYFLOW_H
#define STICKYFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfClassification {
  SF_CLASSIFICATION_LARGE_ENERGY = 0,
  SF_CLASSIFICATION_SMALL_ENERGY = 1,
} SfClassification;

// Result codes.
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_UTF8 = 2,
  // Malformed or out-of-range configuration.
  SF_STATUS_CONFIG = 3,
  // Invalid data or parameters, or a failed solve.
  SF_STATUS_NUMERICAL = 4,
  SF_STATUS_IO = 5,
  // Index or time outside the valid range.
  SF_STATUS_OUT_OF_RANGE = 6,
  // The run stopped early; the trajectory is still returned.
  SF_STATUS_ABORTED = 7,
  // A check failed in `sf_verify`; the report is still returned.
  SF_STATUS_CHECK_FAILED = 8,
  SF_STATUS_PANIC = 9,
} SfStatus;

// Parsed run configuration.
typedef struct SfConfig SfConfig;

// Integrated self-similar scale factor.
typedef struct SfSelfSimilar SfSelfSimilar;

// Output of a run.
typedef struct SfTrajectory SfTrajectory;

// One diagnostics row. Quantities that do not apply to the run are NaN.
typedef struct SfRecord {
  double t;
  double kinetic;
  double thermal;
  double momentum;
  double domain_size;
  double etax_min;
  double etax_max;
  double log_identity_residual;
  double h1_v;
  double l2_vt;
  double h2_eta;
  double apriori_nsf;
} SfRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *sf_last_error(void);

// Library version as a static string.
const char *sf_version(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void sf_string_free(char *s);

// Parses a configuration from INI text.
//
// # Safety
// `source` must be a NUL-terminated string and `out_config` writable.
enum SfStatus sf_config_parse(const char *source, struct SfConfig **out_config);

// Sets one dotted key, e.g. `grid.n_cells`, from its text value.
//
// # Safety
// `config` must be a live handle; `key` and `value` NUL-terminated strings.
enum SfStatus sf_config_set(struct SfConfig *config, const char *key, const char *value);

// The configuration written back as INI text; free with `sf_string_free`.
//
// # Safety
// `config` must be a live handle and `out_text` writable.
enum SfStatus sf_config_echo(const struct SfConfig *config, char **out_text);

// # Safety
// `config` must be NULL or a handle from `sf_config_parse`, freed once.
void sf_config_free(struct SfConfig *config);

// Runs the simulation. An aborted run still produces a trajectory and
// returns `SF_STATUS_ABORTED`.
//
// # Safety
// `config` must be a live handle and `out_traj` writable.
enum SfStatus sf_run(const struct SfConfig *config, struct SfTrajectory **out_traj);

// Runs the verification checklist and returns the report text. Returns
// `SF_STATUS_CHECK_FAILED` if any check failed.
//
// # Safety
// `config` must be a live handle and `out_report` writable.
enum SfStatus sf_verify(const struct SfConfig *config, char **out_report);

// Number of diagnostics rows, 0 for NULL.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t sf_trajectory_len(const struct SfTrajectory *traj);

// # Safety
// `traj` must be NULL or a live handle.
bool sf_trajectory_completed(const struct SfTrajectory *traj);

// # Safety
// `traj` must be a live handle and `out_record` writable.
enum SfStatus sf_trajectory_record(const struct SfTrajectory *traj,
                                   size_t index,
                                   struct SfRecord *out_record);

// Copies the final flow map `eta` at the grid nodes into `buf`. Call with
// `buf` NULL to query the length through `out_len`.
//
// # Safety
// `traj` must be a live handle, `out_len` writable, and `buf` NULL or valid
// for `capacity` doubles.
enum SfStatus sf_trajectory_final_eta(const struct SfTrajectory *traj,
                                      double *buf,
                                      size_t capacity,
                                      size_t *out_len);

// Writes the diagnostics as CSV.
//
// # Safety
// `traj` must be a live handle and `path` a NUL-terminated string.
enum SfStatus sf_trajectory_write_csv(const struct SfTrajectory *traj, const char *path);

// # Safety
// `traj` must be NULL or a handle from `sf_run`, freed once.
void sf_trajectory_free(struct SfTrajectory *traj);

// Integrates the scale factor on `[0, t_end]`. A collapse before `t_end`
// is not an error; see `sf_selfsimilar_collapse`.
//
// # Safety
// `out_solution` must be writable.
enum SfStatus sf_selfsimilar_integrate(double alpha,
                                       double sigma0,
                                       double dsigma0,
                                       double t_end,
                                       double tol,
                                       struct SfSelfSimilar **out_solution);

// `sigma(t)` and `sigma'(t)`; either output may be NULL.
//
// # Safety
// `solution` must be a live handle; non-NULL outputs writable.
enum SfStatus sf_selfsimilar_eval(const struct SfSelfSimilar *solution,
                                  double t,
                                  double *out_sigma,
                                  double *out_dsigma);

// # Safety
// `solution` must be a live handle and the outputs writable.
enum SfStatus sf_selfsimilar_summary(const struct SfSelfSimilar *solution,
                                     double *out_gamma,
                                     enum SfClassification *out_class,
                                     double *out_limit);

// End of the integrated interval and the collapse time, or NaN when the
// scale factor stayed positive.
//
// # Safety
// `solution` must be a live handle and the outputs writable.
enum SfStatus sf_selfsimilar_horizon(const struct SfSelfSimilar *solution,
                                     double *out_t_end,
                                     double *out_collapse);

// # Safety
// `solution` must be NULL or a handle from `sf_selfsimilar_integrate`, freed once.
void sf_selfsimilar_free(struct SfSelfSimilar *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STICKYFLOW_H */
