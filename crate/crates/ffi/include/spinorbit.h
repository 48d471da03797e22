#ifndef SPINORBIT_H
#define SPINORBIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SoStatus {
  SO_STATUS_OK = 0,
  SO_STATUS_NULL_POINTER = 1,
  // Argument outside the domain of a function, or a derivative asked
  // for at a kink.
  SO_STATUS_DOMAIN = 2,
  // Integration failure or a state outside the strip it was sent to.
  SO_STATUS_INTEGRATION = 3,
  // Invalid parameters or configuration text.
  SO_STATUS_CONFIG = 4,
  SO_STATUS_PANIC = 5,
} SoStatus;

// Streaming capture detector.
typedef struct SoDetector SoDetector;

// Everything the Poincaré map needs: model, fitted tide and strip maps.
typedef struct SoDynamics SoDynamics;

// Model parameters with their Hansen table.
typedef struct SoModel SoModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. Valid
// until the next failing call on the same thread.
const char *spinorbit_last_error(void);

// Build a model from `key = value` lines (NULL for the defaults).
//
// # Safety
// `params` must be NULL or a NUL-terminated string; `out` must be valid
// for writing.
enum SoStatus spinorbit_model_new(const char *params, struct SoModel **out);

// # Safety
// `model` must be NULL or a handle from [`spinorbit_model_new`], not yet
// freed.
void spinorbit_model_free(struct SoModel *model);

// Mean motion `n` in rad/yr.
//
// # Safety
// `model` must be a live handle and `out` valid for writing.
enum SoStatus spinorbit_model_mean_motion(const struct SoModel *model, double *out);

// Hansen coefficient `G_20q(e)` of the model's table.
//
// # Safety
// `model` must be a live handle and `out` valid for writing.
enum SoStatus spinorbit_g20(const struct SoModel *model, int32_t q, double *out);

// Triaxial, tidal and total angular acceleration, yr^-2, with the exact
// tidal sum. Any output pointer may be NULL.
//
// # Safety
// `model` must be a live handle; non-NULL outputs must be valid for
// writing.
enum SoStatus spinorbit_accel(const struct SoModel *model,
                              double theta,
                              double theta_dot,
                              double t,
                              double *tri,
                              double *tide,
                              double *total);

// Derivative of the tidal acceleration with respect to `theta_dot`;
// `Domain` at a kink.
//
// # Safety
// `model` must be a live handle and `out` valid for writing.
enum SoStatus spinorbit_accel_tide_deriv(const struct SoModel *model,
                                         double theta_dot,
                                         double *out);

// Build the map machinery from `key = value` lines (NULL for defaults).
// Takes a few seconds: it fits the tide and compiles the strip maps.
//
// # Safety
// As for [`spinorbit_model_new`].
enum SoStatus spinorbit_dynamics_new(const char *params, struct SoDynamics **out);

// # Safety
// `dynamics` must be NULL or a live handle.
void spinorbit_dynamics_free(struct SoDynamics *dynamics);

// Apply the Poincaré map `count` times to `(*theta, *theta_dot)` in
// place, starting at a section time. `rk_only` forces Runge-Kutta in
// every strip and `exact_tide` makes it use the exact tidal sum. On
// failure the state is left as it was.
//
// # Safety
// `dynamics` must be a live handle; `theta` and `theta_dot` valid for
// reading and writing.
enum SoStatus spinorbit_iterate(const struct SoDynamics *dynamics,
                                bool rk_only,
                                bool exact_tide,
                                uint64_t count,
                                double *theta,
                                double *theta_dot);

// New capture detector. `n` is the mean motion used to normalise rates.
//
// # Safety
// `out` must be valid for writing.
enum SoStatus spinorbit_detector_new(uint64_t block_len,
                                     uint64_t blocks,
                                     double eps_mean,
                                     double eps_slope,
                                     double n,
                                     struct SoDetector **out);

// # Safety
// `detector` must be NULL or a live handle.
void spinorbit_detector_free(struct SoDetector *detector);

// Feed one `theta_dot` sample. `*captured` becomes true once capture has
// been declared, with twice the resonance ratio in `*attractor_2p`.
//
// # Safety
// `detector` must be a live handle; outputs valid for writing.
enum SoStatus spinorbit_detector_update(struct SoDetector *detector,
                                        double theta_dot,
                                        bool *captured,
                                        int64_t *attractor_2p);

// Samples consumed so far.
//
// # Safety
// `detector` must be a live handle and `out` valid for writing.
enum SoStatus spinorbit_detector_samples(const struct SoDetector *detector, uint64_t *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPINORBIT_H */
