#ifndef EPDIFF_BLOWUP_H
#define EPDIFF_BLOWUP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EpdStatus {
  EPD_STATUS_OK = 0,
  /**
   * Validation failure (bad parameter, config, length).
   */
  EPD_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Quadrature non-convergence or step underflow.
   */
  EPD_STATUS_NUMERICAL_FAILURE = 2,
  /**
   * A state or criterion invariant was violated.
   */
  EPD_STATUS_INVARIANT_VIOLATION = 3,
  EPD_STATUS_NULL_POINTER = 4,
  EPD_STATUS_PANIC = 5,
} EpdStatus;

typedef enum EpdPath {
  EPD_PATH_NAIVE = 0,
  EPD_PATH_FAST = 1,
  EPD_PATH_BOTH = 2,
} EpdPath;

typedef enum EpdTermination {
  EPD_TERMINATION_THRESHOLD = 0,
  EPD_TERMINATION_TIME_LIMIT = 1,
  EPD_TERMINATION_STEP_UNDERFLOW = 2,
} EpdTermination;

/**
 * Opaque Green-kernel handle.
 */
typedef struct EpdKernel EpdKernel;

/**
 * Opaque handle to a finished run.
 */
typedef struct EpdSimulation EpdSimulation;

/**
 * Run parameters; `dt` or `t_max` ≤ 0 selects the automatic value.
 */
typedef struct EpdSimParams {
  uint32_t n;
  uint32_t k;
  size_t points;
  double r_max;
  double dt;
  double t_max;
  double dt_min;
  double rho_threshold;
  /**
   * ω₀ = -amplitude·r·e^{-r²}.
   */
  double amplitude;
  enum EpdPath path;
  size_t record_stride;
} EpdSimParams;

typedef struct EpdReport {
  bool blew_up;
  bool has_t_est;
  double t_est;
  double r_star;
  double c_est;
  bool criteria_passed;
  double energy_drift;
  enum EpdTermination termination;
  size_t steps;
  size_t rejected_steps;
  double t_final;
} EpdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *epd_last_error_message(void);

/**
 * Gauss ₂F₁(a, b; c; z).
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum EpdStatus epd_f21(double a, double b, double c, double z, double *out);

/**
 * Kernel of (-Δ)^k on radial vector fields in R^n.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum EpdStatus epd_kernel_new(uint32_t k, uint32_t n, struct EpdKernel **out);

/**
 * # Safety
 * `kernel` must come from [`epd_kernel_new`] and not be used afterwards.
 */
void epd_kernel_free(struct EpdKernel *kernel);

/**
 * δ_k(r, s) for 0 ≤ r ≤ s.
 *
 * # Safety
 * `kernel` must be a live handle and `out` valid for a write.
 */
enum EpdStatus epd_kernel_delta(const struct EpdKernel *kernel, double r, double s, double *out);

/**
 * C_est(k, n), the constant of the comparison equation.
 *
 * # Safety
 * `kernel` must be a live handle and `out` valid for a write.
 */
enum EpdStatus epd_kernel_comparison_constant(const struct EpdKernel *kernel, double *out);

/**
 * u = G ω on the uniform grid r_i = i·r_max/(len-1).
 *
 * # Safety
 * `omega` must point to `len` readable values, `out` to `len` writable ones.
 */
enum EpdStatus epd_greens_apply_uniform(const struct EpdKernel *kernel,
                                        const double *omega,
                                        size_t len,
                                        double r_max,
                                        double *out);

/**
 * Defaults for a pair: 1024 points, r_max 8, automatic dt and t_max.
 */
struct EpdSimParams epd_sim_params_default(uint32_t n, uint32_t k);

/**
 * Integrates one run. A step underflow still yields a handle (its report
 * says so); only validation and hard numerical errors fail.
 *
 * # Safety
 * `params` must be readable and `out` valid for a write.
 */
enum EpdStatus epd_simulation_run(const struct EpdSimParams *params, struct EpdSimulation **out);

/**
 * # Safety
 * `sim` must come from [`epd_simulation_run`] and not be used afterwards.
 */
void epd_simulation_free(struct EpdSimulation *sim);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for a write.
 */
enum EpdStatus epd_simulation_report(const struct EpdSimulation *sim, struct EpdReport *out);

/**
 * Number of accepted states in the step history (including t = 0).
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for a write.
 */
enum EpdStatus epd_simulation_history_len(const struct EpdSimulation *sim, size_t *out);

/**
 * Copies (t, min ρ, min slope) of the step history; each buffer must hold
 * `cap` ≥ history length values. Null buffers are skipped.
 *
 * # Safety
 * `sim` must be a live handle; non-null buffers must hold `cap` values.
 */
enum EpdStatus epd_simulation_history(const struct EpdSimulation *sim,
                                      double *t,
                                      double *min_rho,
                                      double *min_slope,
                                      size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPDIFF_BLOWUP_H */
