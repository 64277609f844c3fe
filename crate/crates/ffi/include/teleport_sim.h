#ifndef TELEPORT_SIM_H
#define TELEPORT_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero parse, validation, infeasible and runtime codes
 * match the exit codes of the command-line tool.
 */
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_PARSE = 2,
  TS_STATUS_VALIDATION = 3,
  TS_STATUS_INFEASIBLE = 4,
  TS_STATUS_RUNTIME = 5,
  TS_STATUS_INVALID_ARGUMENT = 6,
  TS_STATUS_PANIC = 7,
} TsStatus;

/**
 * Photon-number strategy of the classical weak-coherent-state bound.
 */
typedef enum TsWcsStrategy {
  TS_WCS_STRATEGY_STATE_ESTIMATION = 0,
  TS_WCS_STRATEGY_UNAMBIGUOUS_DISCRIMINATION = 1,
} TsWcsStrategy;

/**
 * Simulation parameters.
 */
typedef struct TsConfig TsConfig;

/**
 * Outcome of one scenario run.
 */
typedef struct TsResult TsResult;

/**
 * A figure of merit with its one-sigma error; `present` is false when the
 * run had no counts for it.
 */
typedef struct TsEstimate {
  bool present;
  double value;
  double sigma;
} TsEstimate;

/**
 * Mean fidelities of a run.
 */
typedef struct TsFidelities {
  struct TsEstimate f_poles;
  struct TsEstimate f_eq;
  struct TsEstimate f_bar;
  struct TsEstimate unconditional_f_eq;
} TsFidelities;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ts_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *ts_version(void);

/**
 * Creates the preset configuration of `scenario` ("short-distance",
 * "long-distance" or "rate-sweep").
 *
 * # Safety
 * `scenario` must be a nul-terminated string and `out` a valid pointer.
 */
enum TsStatus ts_config_preset(const char *scenario, struct TsConfig **out);

/**
 * Parses and validates a TOML configuration.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum TsStatus ts_config_from_toml(const char *toml, struct TsConfig **out);

/**
 * Releases a configuration; null is ignored.
 *
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void ts_config_free(struct TsConfig *config);

/**
 * Sets the attempts per analyzer setting and the master seed.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum TsStatus ts_config_set_campaign(struct TsConfig *config,
                                     uint64_t n_attempts,
                                     uint64_t master_seed);

/**
 * Sets the white-noise weight of the pair source.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum TsStatus ts_config_set_werner_noise(struct TsConfig *config, double weight);

/**
 * Storage time left after the herald arrives, μs; negative when late.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum TsStatus ts_config_storage_margin_us(const struct TsConfig *config, double *out);

/**
 * Single-mode rate limit (kHz, 0 when unbounded) and multiplexed rate
 * limit (MHz).
 *
 * # Safety
 * `config` must be a live handle; both outputs must be valid pointers.
 */
enum TsStatus ts_config_rate_limits(const struct TsConfig *config,
                                    double *single_mode_khz,
                                    double *multiplexed_mhz);

/**
 * Runs a scenario; rate sweeps use the standard rates.
 *
 * # Safety
 * `config` must be a live handle, `scenario` a nul-terminated string and
 * `out` a valid pointer.
 */
enum TsStatus ts_run(const struct TsConfig *config,
                     const char *scenario,
                     bool strict,
                     struct TsResult **out);

/**
 * Releases a result; null is ignored.
 *
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void ts_result_free(struct TsResult *result);

/**
 * Fidelities from sampled counts (`expected` false) or expected counts.
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum TsStatus ts_result_fidelities(const struct TsResult *result,
                                   bool expected,
                                   struct TsFidelities *out);

/**
 * The full result as JSON; release with [`ts_string_free`].
 *
 * # Safety
 * `result` must be a live handle.
 */
char *ts_result_json(const struct TsResult *result);

/**
 * Coincidence histogram as CSV; release with [`ts_string_free`].
 *
 * # Safety
 * `result` must be a live handle.
 */
char *ts_result_histogram_csv(const struct TsResult *result);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ts_string_free(char *s);

/**
 * Classical fidelity limit for weak coherent input of mean `mu` heralded
 * with probability `herald_efficiency` per attempt.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TsStatus ts_classical_bound_wcs(double mu,
                                     double herald_efficiency,
                                     enum TsWcsStrategy strategy,
                                     uint32_t n_usd,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TELEPORT_SIM_H */
