#ifndef VVLAB_H
#define VVLAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VvStatus {
  VV_OK = 0,
  VV_NULL_POINTER = 1,
  VV_INVALID_INPUT = 2,
  VV_UNKNOWN_SYSTEM = 3,
  /**
   * Non-real, complex or degenerate spectrum.
   */
  VV_SPECTRUM = 4,
  /**
   * State left the box or became non-finite.
   */
  VV_STATE = 5,
  VV_GRID_TOO_LARGE = 6,
  VV_BUFFER_TOO_SMALL = 7,
  VV_PANIC = 8,
  VV_OTHER = 9,
} VvStatus;

/**
 * Opaque system model.
 */
typedef struct VvModel VvModel;

/**
 * Opaque running simulation.
 */
typedef struct VvSimulation VvSimulation;

typedef struct VvHypothesisSummary {
  size_t samples;
  double min_gap;
  double mu_floor;
  double max_commutator;
  bool passed;
} VvHypothesisSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t vv_last_error_message(char *buf, size_t len);

/**
 * Creates a builtin model by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum VvStatus vv_model_builtin(const char *name, struct VvModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`vv_model_builtin`] and not be used afterwards.
 */
void vv_model_free(struct VvModel *model);

/**
 * System dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vv_model_dim(const struct VvModel *model);

/**
 * Samples the state box on `samples_per_axis` points per axis.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum VvStatus vv_check_hypotheses(const struct VvModel *model,
                                  size_t samples_per_axis,
                                  struct VvHypothesisSummary *out);

/**
 * Spectral frame at state `u` (length n): ascending `lambdas`, paired `mus`
 * and unit right eigenvectors stored column-major in `right` (n·n).
 *
 * # Safety
 * Pointers must reference buffers of the stated lengths.
 */
enum VvStatus vv_decompose(const struct VvModel *model,
                           const double *u,
                           double *lambdas,
                           double *mus,
                           double *right);

/**
 * Starts a simulation of `u_t + A u_x = ε(B u_x)_x` on `cells` uniform
 * cells of `[xmin, xmax]` from cell-major `values` (cells·n).
 *
 * # Safety
 * `model` must be live, `values` must hold `cells·n` doubles, `out` writable.
 */
enum VvStatus vv_sim_new(const struct VvModel *model,
                         double xmin,
                         double xmax,
                         size_t cells,
                         const double *values,
                         bool periodic,
                         double epsilon,
                         struct VvSimulation **out);

/**
 * Advances to time `t` (no-op if already there).
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum VvStatus vv_sim_advance(struct VvSimulation *sim, double t);

/**
 * Current time, NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or live.
 */
double vv_sim_time(const struct VvSimulation *sim);

/**
 * Copies cell-major values into `out`, which must hold at least cells·n doubles.
 *
 * # Safety
 * `sim` must be live and `out` must point to `len` doubles.
 */
enum VvStatus vv_sim_values(const struct VvSimulation *sim, double *out, size_t len);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must come from [`vv_sim_new`] and not be used afterwards.
 */
void vv_sim_free(struct VvSimulation *sim);

/**
 * Total variation `Σ|q_{j+1} − q_j|` of a scalar array.
 *
 * # Safety
 * `q` must hold `len` doubles; `out` writable.
 */
enum VvStatus vv_tv(const double *q, size_t len, double *out);

/**
 * Transversal interaction `h² Σ K(x_j − x_k)|z_j||z#_k|`.
 *
 * # Safety
 * `z` and `z_sharp` must hold `len` doubles; `out` writable.
 */
enum VvStatus vv_transversal_q(const double *z,
                               const double *z_sharp,
                               size_t len,
                               double h,
                               double c,
                               double c1,
                               double *out);

/**
 * Area functional `½ h² Σ_{j<k} |ζ1_j ζ2_k − ζ1_k ζ2_j|`.
 *
 * # Safety
 * `zeta1` and `zeta2` must hold `len` doubles; `out` writable.
 */
enum VvStatus vv_area(const double *zeta1, const double *zeta2, size_t len, double h, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VVLAB_H */
