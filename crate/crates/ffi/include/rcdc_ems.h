#ifndef RCDC_EMS_H
#define RCDC_EMS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcdcConfiguration {
  RCDC_CONFIGURATION_NO_COLOCATION = 0,
  RCDC_CONFIGURATION_COLOCATION = 1,
  RCDC_CONFIGURATION_OPTIMAL = 2,
} RcdcConfiguration;

typedef enum RcdcMarket {
  RCDC_MARKET_WHOLESALE = 0,
  RCDC_MARKET_RETAIL = 1,
} RcdcMarket;

typedef enum RcdcStatus {
  RCDC_STATUS_OK = 0,
  RCDC_STATUS_NULL_POINTER = 1,
  RCDC_STATUS_INVALID_ARGUMENT = 2,
  RCDC_STATUS_INVALID_INPUT = 3,
  RCDC_STATUS_SOLVER_FAILURE = 4,
  RCDC_STATUS_IO = 5,
  RCDC_STATUS_PANIC = 6,
} RcdcStatus;

/**
 * Opaque processing-curve handle.
 */
typedef struct RcdcCurve RcdcCurve;

/**
 * Opaque study handle.
 */
typedef struct RcdcScenario RcdcScenario;

/**
 * Monthly settlement of one configuration. Savings fields are NaN for the
 * no-colocation baseline.
 */
typedef struct RcdcReport {
  double imported_mwh;
  double exported_mwh;
  double self_consumption_mwh;
  double peak_demand_kw;
  double energy_cost_usd;
  double demand_charge_usd;
  double net_cost_usd;
  double pct_savings_vs_baseline;
  double investment_adjusted_savings_usd;
} RcdcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *rcdc_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *rcdc_version(void);

/**
 * Loads a scenario from a TOML config file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum RcdcStatus rcdc_scenario_from_config(const char *path, struct RcdcScenario **out);

/**
 * Builds a scenario on synthetic traces with default plant limits and curve.
 * `profile` is "windy", "diurnal-solar" or "flat".
 *
 * # Safety
 * `profile` must be a nul-terminated string and `out` a valid pointer.
 */
enum RcdcStatus rcdc_scenario_synthetic(uint64_t seed,
                                        const char *profile,
                                        uint32_t days,
                                        double dc_capacity_kw,
                                        double renewable_capacity_kw,
                                        double deferrable_fraction,
                                        struct RcdcScenario **out);

/**
 * # Safety
 * `scenario` must come from this library and not be used afterwards.
 */
void rcdc_scenario_free(struct RcdcScenario *scenario);

/**
 * Number of intervals in the scenario's time grid (0 for null).
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t rcdc_scenario_intervals(const struct RcdcScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum RcdcStatus rcdc_scenario_set_deferrable_fraction(struct RcdcScenario *scenario,
                                                      double fraction);

/**
 * Simulates one configuration for the month and settles it, with savings
 * against the no-colocation baseline. `market` and `configuration` take
 * [`RcdcMarket`] and [`RcdcConfiguration`] values; others are rejected.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum RcdcStatus rcdc_simulate(const struct RcdcScenario *scenario,
                              uint32_t market,
                              uint32_t configuration,
                              struct RcdcReport *out);

/**
 * Builds a concave piecewise-linear curve from `len` breakpoints
 * `(powers[i], rates[i])`, the first being `(0, 0)`.
 *
 * # Safety
 * `powers` and `rates` must point to `len` doubles; `out` must be valid.
 */
enum RcdcStatus rcdc_curve_new(const double *powers,
                               const double *rates,
                               size_t len,
                               struct RcdcCurve **out);

/**
 * # Safety
 * `curve` must come from this library and not be used afterwards.
 */
void rcdc_curve_free(struct RcdcCurve *curve);

/**
 * Work processed in `interval_hours` at `power_kw`.
 *
 * # Safety
 * `curve` must be a live handle and `out` a valid pointer.
 */
enum RcdcStatus rcdc_curve_compute_work(const struct RcdcCurve *curve,
                                        double power_kw,
                                        double interval_hours,
                                        double *out);

/**
 * Least power that processes `work` in `interval_hours`.
 *
 * # Safety
 * `curve` must be a live handle and `out` a valid pointer.
 */
enum RcdcStatus rcdc_curve_min_power(const struct RcdcCurve *curve,
                                     double work,
                                     double interval_hours,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RCDC_EMS_H */
