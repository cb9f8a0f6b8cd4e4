/* C interface to the selforg cavity simulator (generated by cbindgen). */

#ifndef SELFORG_H
#define SELFORG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Observables addressable through the getters.
 */
typedef enum SelforgObservable {
  /**
   * Sample times, in 1/Γ.
   */
  SELFORG_OBSERVABLE_TIME = 0,
  /**
   * Signed checkerboard order parameter Θ ∈ [−1, 1].
   */
  SELFORG_OBSERVABLE_THETA = 1,
  /**
   * |Θ|.
   */
  SELFORG_OBSERVABLE_THETA_ABS = 2,
  /**
   * Kinetic energy per atom, in Γ.
   */
  SELFORG_OBSERVABLE_E_KIN = 3,
  /**
   * Main-mode photon number ⟨a†a⟩.
   */
  SELFORG_OBSERVABLE_N_PHOT = 4,
  /**
   * Mean atomic inversion ⟨σᶻ⟩.
   */
  SELFORG_OBSERVABLE_INVERSION = 5,
  /**
   * Filter-mode photon number ⟨b†b⟩ (two-mode configurations only).
   */
  SELFORG_OBSERVABLE_N_PHOT_B = 6,
} SelforgObservable;

/**
 * Result of every fallible call.
 */
typedef enum SelforgStatus {
  /**
   * The call succeeded.
   */
  SELFORG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SELFORG_STATUS_NULL_ARGUMENT = 1,
  /**
   * The configuration, engine name, or integrator settings were rejected.
   */
  SELFORG_STATUS_INVALID_CONFIG = 2,
  /**
   * The integration aborted (stiffness or a physicality violation).
   */
  SELFORG_STATUS_RUN_FAILED = 3,
  /**
   * The request does not fit the run (wrong buffer length, observable not
   * present in this model, meaningless average).
   */
  SELFORG_STATUS_BAD_REQUEST = 4,
  /**
   * A panic was caught at the boundary.
   */
  SELFORG_STATUS_PANICKED = 5,
} SelforgStatus;

/**
 * Opaque result handle: the sampled trajectory and its observable records.
 */
typedef struct SelforgRun SelforgRun;

/**
 * Opaque simulation handle: configuration, closure level, and integrator
 * settings.
 */
typedef struct SelforgSim SelforgSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message of the most recent failure on this thread into `buf`
 * (truncated, always NUL-terminated when `len > 0`). Returns the full
 * length of the message in bytes, excluding the terminator; call with a
 * null `buf` to size a buffer first.
 */
uintptr_t selforg_last_error_message(char *buf, uintptr_t len);

/**
 * Version of the underlying crate as a static NUL-terminated string.
 */
const char *selforg_version(void);

/**
 * Parse a TOML configuration and an engine name (`"second-order"` or
 * `"mean-field"`) into a simulation handle. Returns null on error; see
 * `selforg_last_error_message`. Free with `selforg_sim_free`.
 */
struct SelforgSim *selforg_sim_new(const char *config_toml, const char *engine);

/**
 * Override the integrator settings of a simulation handle.
 */
enum SelforgStatus selforg_sim_set_integrator(struct SelforgSim *sim,
                                              double rel_tol,
                                              double abs_tol,
                                              double max_step,
                                              double sample_dt);

/**
 * Integrate the configured system from its seeded initial cloud to t_final
 * and hand back a result handle in `*out`. Free it with `selforg_run_free`.
 */
enum SelforgStatus selforg_sim_run(const struct SelforgSim *sim, struct SelforgRun **out);

/**
 * Number of samples in a run (0 for a null handle).
 */
uintptr_t selforg_run_len(const struct SelforgRun *run);

/**
 * Copy one observable's time series into `buf`, which must hold exactly
 * `selforg_run_len` values.
 */
enum SelforgStatus selforg_run_series(const struct SelforgRun *run,
                                      enum SelforgObservable observable,
                                      double *buf,
                                      uintptr_t len);

/**
 * Average one observable over the trailing `window` (in 1/Γ) of the run and
 * write it to `*out`. Θ averages signed, |Θ| averages the magnitude; the
 * time axis cannot be averaged.
 */
enum SelforgStatus selforg_run_average(const struct SelforgRun *run,
                                       enum SelforgObservable observable,
                                       double window,
                                       double *out);

/**
 * Release a simulation handle. Null is ignored.
 */
void selforg_sim_free(struct SelforgSim *sim);

/**
 * Release a result handle. Null is ignored.
 */
void selforg_run_free(struct SelforgRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELFORG_H */
