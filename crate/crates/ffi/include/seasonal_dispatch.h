#ifndef SEASONAL_DISPATCH_H
#define SEASONAL_DISPATCH_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum SdMethod {
  // Heat-storage targets from a reference year, battery free.
  SD_METHOD_HYBRID = 0,
  // Both storages return to their window-start levels.
  SD_METHOD_FIXED_LEVEL = 1,
  // No end conditions before the end of the period.
  SD_METHOD_FREE = 2,
} SdMethod;

typedef enum SdStatus {
  SD_STATUS_OK = 0,
  // A window had no feasible schedule.
  SD_STATUS_INFEASIBLE = 1,
  // Null pointer, bad length or out-of-range parameter.
  SD_STATUS_INVALID_ARGUMENT = 2,
  // Config or data files could not be read.
  SD_STATUS_INPUT_ERROR = 3,
  // Solver limit or numerical failure.
  SD_STATUS_SOLVER_ERROR = 4,
  // Unexpected internal failure.
  SD_STATUS_INTERNAL = 5,
} SdStatus;

typedef enum SdStorage {
  SD_STORAGE_BATTERY = 0,
  SD_STORAGE_HEAT_STORAGE = 1,
} SdStorage;

// Device parameters and topology.
typedef struct SdNetwork SdNetwork;

// Per-hour input series.
typedef struct SdSeries SdSeries;

// Result of a full-horizon or rolling simulation.
typedef struct SdTrace SdTrace;

// Storage parameters. Energies in kWh, powers in kW, `retention` is the
// fraction kept per hour. A NaN `e_end` means "same as `e_init`".
typedef struct SdStorageParams {
  double eta_ch;
  double eta_dis;
  double retention;
  double e_min;
  double e_max;
  double p_ch_max;
  double p_dis_max;
  double e_init;
  double e_end;
} SdStorageParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// Valid until the next call into the library from the same thread.
const char *sd_last_error(void);

// Library version as a static NUL-terminated string.
const char *sd_version(void);

// Reference parameters of the battery or the heat storage.
//
// # Safety
// `out` must be valid for writes.
enum SdStatus sd_storage_reference(enum SdStorage which, struct SdStorageParams *out);

// Hours to fill the usable range at full charge power and to empty it at
// full discharge power, ignoring self-discharge.
//
// # Safety
// `params` must point to a valid struct; the outputs must be valid for writes.
enum SdStatus sd_storage_durations(const struct SdStorageParams *params,
                                   double *charge_hours,
                                   double *discharge_hours);

// Same as [`sd_storage_durations`] with self-discharge taken into account.
//
// # Safety
// As for [`sd_storage_durations`].
enum SdStatus sd_leaky_fill_horizon(const struct SdStorageParams *params,
                                    double *charge_hours,
                                    double *discharge_hours);

// The reference building.
struct SdNetwork *sd_network_reference(void);

// A network with the given storages and heat pump. Null on failure.
//
// # Safety
// `battery` and `heat_storage` must point to valid structs.
struct SdNetwork *sd_network_new(const struct SdStorageParams *battery,
                                 const struct SdStorageParams *heat_storage,
                                 double hp_cop,
                                 double hp_heat_max_kw);

// # Safety
// `net` must be null or a handle from this library not yet freed.
void sd_network_free(struct SdNetwork *net);

// Series from caller arrays, each of length `n`. Null on failure.
//
// # Safety
// Every pointer must reference `n` readable doubles.
struct SdSeries *sd_series_new(size_t n,
                               const double *d_de,
                               const double *d_dh,
                               const double *p_pv,
                               const double *p_st,
                               const double *p_ac,
                               const double *c_buy,
                               const double *c_sell);

// Deterministic synthetic series of `days` days starting on day of year
// `first_day`.
struct SdSeries *sd_series_synthetic(size_t days, size_t first_day, uint64_t seed);

// Loads a case config (TOML) and its CSV inputs.
//
// # Safety
// `config_path` must be a NUL-terminated string; the outputs must be
// valid for writes. On success the caller owns both handles.
enum SdStatus sd_case_load(const char *config_path,
                           struct SdNetwork **out_network,
                           struct SdSeries **out_series);

// Number of steps, or 0 for null.
//
// # Safety
// `series` must be null or a live handle.
size_t sd_series_len(const struct SdSeries *series);

// # Safety
// `series` must be null or a handle from this library not yet freed.
void sd_series_free(struct SdSeries *series);

// Optimizes the whole series at once with the network's year-boundary
// levels pinned at both ends.
//
// # Safety
// `net` and `series` must be live handles; `out` must be valid for writes.
enum SdStatus sd_full_horizon(const struct SdNetwork *net,
                              const struct SdSeries *series,
                              double dt_hours,
                              struct SdTrace **out);

// Rolling-horizon simulation with a one-day control horizon. `targets`
// holds hourly heat-storage levels of a reference year and is read only
// by [`SdMethod::Hybrid`].
//
// # Safety
// Handles must be live; `targets` must reference `n_targets` doubles;
// `out` must be valid for writes.
enum SdStatus sd_rolling(const struct SdNetwork *net,
                         const struct SdSeries *series,
                         enum SdMethod method,
                         size_t prediction_days,
                         const double *targets,
                         size_t n_targets,
                         double dt_hours,
                         struct SdTrace **out);

// Minimum prediction horizon for `day` (0-based) starting from the given
// levels. `out_days` is `max_days + 1` when no horizon up to `max_days`
// was sufficient; `out_found` tells the two cases apart.
//
// # Safety
// Handles must be live; outputs must be valid for writes.
enum SdStatus sd_min_horizon(const struct SdNetwork *net,
                             const struct SdSeries *series,
                             size_t day,
                             double init_battery,
                             double init_heat,
                             size_t max_days,
                             double dt_hours,
                             size_t *out_days,
                             bool *out_found);

// Number of steps, or 0 for null.
//
// # Safety
// `trace` must be null or a live handle.
size_t sd_trace_len(const struct SdTrace *trace);

// Total operating cost in euros, NaN for null.
//
// # Safety
// `trace` must be null or a live handle.
double sd_trace_cost(const struct SdTrace *trace);

// Copies up to `cap` end-of-step storage levels into `buf` and returns
// the trace length, so a call with `cap = 0` queries the size.
//
// # Safety
// `trace` must be a live handle; `buf` must be valid for `cap` writes.
size_t sd_trace_levels(const struct SdTrace *trace, enum SdStorage which, double *buf, size_t cap);

// `(cost - benchmark) / |benchmark|` where `benchmark` is a full-horizon
// trace over the same period.
//
// # Safety
// Handles must be live; `out` must be valid for writes.
enum SdStatus sd_trace_gap(const struct SdTrace *trace,
                           const struct SdTrace *benchmark,
                           double *out);

// Writes the trace as CSV.
//
// # Safety
// `trace` must be a live handle and `path` a NUL-terminated string.
enum SdStatus sd_trace_write_csv(const struct SdTrace *trace, const char *path);

// # Safety
// `trace` must be null or a handle from this library not yet freed.
void sd_trace_free(struct SdTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEASONAL_DISPATCH_H */
