#ifndef PTKICK_H
#define PTKICK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PtkStatus {
  PTK_STATUS_OK = 0,
  PTK_STATUS_NULL_POINTER = 1,
  PTK_STATUS_INVALID_INPUT = 2,
  PTK_STATUS_NUMERICAL = 3,
  PTK_STATUS_IO = 4,
  PTK_STATUS_EIGENSOLVER = 5,
  PTK_STATUS_OUT_OF_RANGE = 6,
  PTK_STATUS_PANIC = 7,
} PtkStatus;

typedef enum PtkRoute {
  PTK_ROUTE_QUADRATURE = 0,
  PTK_ROUTE_FOURIER = 1,
  PTK_ROUTE_BOTH = 2,
} PtkRoute;

typedef struct PtkKickMatrix PtkKickMatrix;

typedef struct PtkSimulation PtkSimulation;

typedef struct PtkSpectrum PtkSpectrum;

typedef struct PtkParams {
  double length;
  double wavelength;
  double epsilon;
  double gamma;
  double period;
  size_t n_basis;
  double dispersion_coeff;
} PtkParams;

/**
 * Observables of the current state, taken before the next kick.
 */
typedef struct PtkObservables {
  uint64_t kick;
  double time;
  double norm;
  double e_kin;
  double e_kin_normalized;
  double e_tot_re;
  double e_tot_im;
} PtkObservables;

typedef struct PtkBreaking {
  bool broken;
  double max_im;
  size_t gain_count;
  size_t loss_count;
  size_t levels_considered;
} PtkBreaking;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ptk_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the NUL, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ptk_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `out` must be null or a valid pointer.
 */
enum PtkStatus ptk_params_default(struct PtkParams *out);

/**
 * # Safety
 * `params` must be null or a valid pointer.
 */
enum PtkStatus ptk_params_validate(const struct PtkParams *params);

/**
 * Builds the kick matrix. With `PTK_ROUTE_BOTH` the routes are
 * cross-checked and a disagreement is reported as `PTK_STATUS_NUMERICAL`.
 *
 * # Safety
 * `params` and `out` must be null or valid pointers.
 */
enum PtkStatus ptk_kick_matrix_new(const struct PtkParams *params,
                                   enum PtkRoute route,
                                   struct PtkKickMatrix **out);

/**
 * # Safety
 * `m` must be null or a handle from `ptk_kick_matrix_new`.
 */
size_t ptk_kick_matrix_dim(const struct PtkKickMatrix *m);

/**
 * Entry V(n, l), 1-based.
 *
 * # Safety
 * `m`, `re` and `im` must be null or valid pointers.
 */
enum PtkStatus ptk_kick_matrix_entry(const struct PtkKickMatrix *m,
                                     size_t n,
                                     size_t l,
                                     double *re,
                                     double *im);

/**
 * # Safety
 * `m` must be null or a handle from `ptk_kick_matrix_new` not yet freed.
 */
void ptk_kick_matrix_free(struct PtkKickMatrix *m);

/**
 * Starts a trajectory in box mode `initial_mode` (1-based).
 *
 * # Safety
 * `params`, `kick` and `out` must be null or valid pointers.
 */
enum PtkStatus ptk_simulation_new(const struct PtkParams *params,
                                  const struct PtkKickMatrix *kick,
                                  size_t initial_mode,
                                  struct PtkSimulation **out);

/**
 * Applies `n_kicks` periods. On overflow the state stays at the last
 * finite kick and `PTK_STATUS_NUMERICAL` is returned.
 *
 * # Safety
 * `sim` must be null or a valid handle.
 */
enum PtkStatus ptk_simulation_step(struct PtkSimulation *sim, uint64_t n_kicks);

/**
 * # Safety
 * `sim` and `out` must be null or valid pointers.
 */
enum PtkStatus ptk_simulation_observables(const struct PtkSimulation *sim,
                                          struct PtkObservables *out);

/**
 * Copies the amplitudes into `re`/`im`, each of length `len` = N.
 *
 * # Safety
 * `re` and `im` must be null or point to `len` writable doubles.
 */
enum PtkStatus ptk_simulation_amplitudes(const struct PtkSimulation *sim,
                                         double *re,
                                         double *im,
                                         size_t len);

/**
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void ptk_simulation_free(struct PtkSimulation *sim);

/**
 * Diagonalizes the Floquet matrix of `kick` at `params`.
 *
 * # Safety
 * `params`, `kick` and `out` must be null or valid pointers.
 */
enum PtkStatus ptk_spectrum_new(const struct PtkParams *params,
                                const struct PtkKickMatrix *kick,
                                struct PtkSpectrum **out);

/**
 * # Safety
 * `s` must be null or a valid handle.
 */
size_t ptk_spectrum_len(const struct PtkSpectrum *s);

/**
 * Eigenvalue λ and quasienergy φ of level `index` (1-based, sorted by
 * Re φ then Im φ). Either output pair may be null.
 *
 * # Safety
 * Non-null output pointers must be valid.
 */
enum PtkStatus ptk_spectrum_level(const struct PtkSpectrum *s,
                                  size_t index,
                                  double *lambda_re,
                                  double *lambda_im,
                                  double *phi_re,
                                  double *phi_im);

/**
 * # Safety
 * `s` and `out` must be null or valid pointers.
 */
enum PtkStatus ptk_spectrum_breaking(const struct PtkSpectrum *s,
                                     double tol,
                                     struct PtkBreaking *out);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void ptk_spectrum_free(struct PtkSpectrum *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTKICK_H */
