#ifndef ACC_FFI_H
#define ACC_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum AccStatus {
  ACC_STATUS_OK = 0,
  ACC_STATUS_NULL_POINTER = 1,
  ACC_STATUS_INVALID_UTF8 = 2,
  ACC_STATUS_PARSE_ERROR = 3,
  ACC_STATUS_CONFIG_ERROR = 4,
  ACC_STATUS_INVALID_GAIN = 5,
  ACC_STATUS_INVALID_SPECTRUM = 6,
  ACC_STATUS_INVALID_ARGUMENT = 7,
  ACC_STATUS_NO_UNIQUE_SOLUTION = 8,
  ACC_STATUS_SINGULAR_EQUILIBRIUM = 9,
  ACC_STATUS_OUT_OF_RANGE = 10,
  ACC_STATUS_NUMERIC_FAILURE = 11,
  ACC_STATUS_ANALYSIS_ERROR = 12,
  ACC_STATUS_IO_ERROR = 13,
  ACC_STATUS_PANIC = 14,
} AccStatus;

// Opaque validated scenario.
typedef struct AccScenario AccScenario;

// Opaque simulation result; remembers the scenario it came from.
typedef struct AccTrace AccTrace;

// One follower's channels at one recorded instant.
typedef struct AccSample {
  double t;
  double lead_v;
  double lead_u;
  double lead_uj;
  double d;
  double v;
  double u;
  double d_tilde;
  double v1_tilde;
  double u1_tilde;
  double h;
  double h_hat;
  double epsilon;
  double v1_lyap;
} AccSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *acc_last_error_message(void);

// Parses and validates scenario JSON.
enum AccStatus acc_scenario_from_json(const char *json, struct AccScenario **out);

// Built-in scenario by name (`accel`, `decel`, `const-jerk`, `string-4`,
// `ccc-2s`, `airsim-like`).
enum AccStatus acc_scenario_from_preset(const char *name, struct AccScenario **out);

// Reads a scenario file.
enum AccStatus acc_scenario_load(const char *path, struct AccScenario **out);

// Overrides the step size; rejected (scenario unchanged) if invalid.
enum AccStatus acc_scenario_set_dt(struct AccScenario *scenario, double dt);

// Overrides the horizon; rejected (scenario unchanged) if invalid or
// beyond the lead profile.
enum AccStatus acc_scenario_set_horizon(struct AccScenario *scenario, double horizon);

// Serializes the scenario; free the string with [`acc_string_free`].
enum AccStatus acc_scenario_to_json(const struct AccScenario *scenario, char **out);

// Number of feasibility warnings (non-fatal) for the scenario.
enum AccStatus acc_scenario_warning_count(const struct AccScenario *scenario, size_t *out);

void acc_scenario_free(struct AccScenario *scenario);

// Runs the closed loop.
enum AccStatus acc_scenario_run(const struct AccScenario *scenario, struct AccTrace **out);

enum AccStatus acc_trace_len(const struct AccTrace *trace, size_t *out);

enum AccStatus acc_trace_follower_count(const struct AccTrace *trace, size_t *out);

// Copies sample `index` of follower `follower` (0-based) into `out`.
enum AccStatus acc_trace_sample(const struct AccTrace *trace,
                                size_t index,
                                size_t follower,
                                struct AccSample *out);

// Writes the trace as CSV to `path`.
enum AccStatus acc_trace_write_csv(const struct AccTrace *trace, const char *path);

// Stability report as JSON; free the string with [`acc_string_free`].
enum AccStatus acc_trace_report_json(const struct AccTrace *trace, char **out);

// Runs every certificate check; `*passed` is true when all hold.
enum AccStatus acc_trace_certify(const struct AccTrace *trace, bool *passed);

void acc_trace_free(struct AccTrace *trace);

void acc_string_free(char *s);

// Gains whose error matrix has the eigenvalues `re[i] + j·im[i]`
// (arrays of length 3). Writes `(g1, g2, g3)` to `gains_out[0..3]`.
enum AccStatus acc_gains_from_eigenvalues(const double *re, const double *im, double *gains_out);

bool acc_is_hurwitz(double g1, double g2, double g3);

// Smallest admissible `(E_v, E_u)` for jerk lower bound `u_min`.
enum AccStatus acc_min_error_bounds(double g1,
                                    double g2,
                                    double g3,
                                    double u_min,
                                    double *e_v,
                                    double *e_u);

// Steady-state spacing surplus for error bound `e_v` and lead jerk `u_j`.
double acc_equilibrium_headway(double e_v, double g1, double u_j, double g3);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACC_FFI_H */
