/* C interface to the algmech mechanics library. Generated by cbindgen. */

#ifndef ALGMECH_H
#define ALGMECH_H

#include <stddef.h>

typedef enum AlgmechStatus {
  ALGMECH_STATUS_OK = 0,
  ALGMECH_STATUS_NULL_POINTER = 1,
  ALGMECH_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed specification, expression or parameters.
   */
  ALGMECH_STATUS_SPEC = 3,
  ALGMECH_STATUS_DIMENSION = 4,
  /*
   Singular Hessian, morphism or transition.
   */
  ALGMECH_STATUS_SINGULAR = 5,
  /*
   Integration stopped early. The trajectory up to that
   point is still returned.
   */
  ALGMECH_STATUS_ABORTED = 6,
  ALGMECH_STATUS_MISSING_PAYLOAD = 7,
  /*
   Index or buffer length out of range.
   */
  ALGMECH_STATUS_OUT_OF_RANGE = 8,
  ALGMECH_STATUS_IO = 9,
  ALGMECH_STATUS_PANIC = 10,
} AlgmechStatus;

/*
 A built mechanical system.
 */
typedef struct AlgmechSystem AlgmechSystem;

/*
 An integrated trajectory. Rows are laid out as in the CSV output:
 `t, x1..xm, y1..yr, E_L, monitors...`.
 */
typedef struct AlgmechTrajectory AlgmechTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or an empty string.
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *algmech_last_error(void);

/*
 Builds a system from a JSON specification. With `strict` nonzero,
 unknown fields are rejected.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AlgmechStatus algmech_system_from_json(const char *json,
                                            int strict,
                                            struct AlgmechSystem **out);

/*
 Builds a catalog system such as `"rigid_body_so3"`. `params` may be null
 when `n_params` is zero.

 # Safety
 `id` must be a NUL-terminated string, `params` must point to `n_params`
 doubles and `out` must be valid.
 */
enum AlgmechStatus algmech_system_builtin(const char *id,
                                          const double *params,
                                          size_t n_params,
                                          struct AlgmechSystem **out);

/*
 # Safety
 `sys` must come from this library and not be used afterwards. Null is
 ignored.
 */
void algmech_system_free(struct AlgmechSystem *sys);

/*
 Base dimension `m` and fibre dimension `r`.

 # Safety
 All pointers must be valid.
 */
enum AlgmechStatus algmech_system_dims(const struct AlgmechSystem *sys, size_t *m, size_t *r);

/*
 Right-hand side `(ẋ, ẏ)` of the equations of motion at `state = (x, y)`.
 Both buffers have length `m + r`.

 # Safety
 `state` and `out` must point to `len` doubles.
 */
enum AlgmechStatus algmech_semispray_rhs(const struct AlgmechSystem *sys,
                                         const double *state,
                                         double *out,
                                         size_t len);

/*
 Integrates from the specification's initial state. On
 `ALGMECH_STATUS_ABORTED` the partial trajectory is still stored in `out`.

 # Safety
 `sys` and `out` must be valid.
 */
enum AlgmechStatus algmech_simulate(const struct AlgmechSystem *sys,
                                    struct AlgmechTrajectory **out);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `traj` must be null or come from [`algmech_simulate`].
 */
size_t algmech_trajectory_len(const struct AlgmechTrajectory *traj);

/*
 Values per row: `2 + m + r` plus one per monitor. 0 for a null handle.

 # Safety
 `traj` must be null or come from [`algmech_simulate`].
 */
size_t algmech_trajectory_width(const struct AlgmechTrajectory *traj);

/*
 Copies row `k` into `out`, which holds `len` doubles. `E_L` is NaN when the
 system has no Lagrangian.

 # Safety
 `traj` must come from [`algmech_simulate`] and `out` must point to `len`
 doubles.
 */
enum AlgmechStatus algmech_trajectory_row(const struct AlgmechTrajectory *traj,
                                          size_t k,
                                          double *out,
                                          size_t len);

/*
 # Safety
 `traj` must come from [`algmech_simulate`] and not be used afterwards.
 Null is ignored.
 */
void algmech_trajectory_free(struct AlgmechTrajectory *traj);

/*
 Runs the verification suite and returns the JSON report in `out_json`,
 to be released with [`algmech_string_free`]. `samples` of 0 keeps the
 specification's count; `tol` of 0 or less keeps the default tolerances.
 `transition` may be null. `all_pass` receives 1 if every check passed.

 # Safety
 `sys`, `out_json` and `all_pass` must be valid; `transition` must be null
 or NUL-terminated.
 */
enum AlgmechStatus algmech_verify_json(const struct AlgmechSystem *sys,
                                       size_t samples,
                                       double tol,
                                       const char *transition,
                                       char **out_json,
                                       int *all_pass);

/*
 # Safety
 `s` must come from this library and not be used afterwards. Null is
 ignored.
 */
void algmech_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALGMECH_H */
