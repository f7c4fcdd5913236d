#ifndef WIFI_SLICING_H
#define WIFI_SLICING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_ARGUMENT = 2,
  WS_STATUS_CONFIG = 3,
  WS_STATUS_IO = 4,
  /**
   * Some runs of a sweep failed; the others were written.
   */
  WS_STATUS_PARTIAL = 5,
  WS_STATUS_PANIC = 6,
} WsStatus;

/**
 * Opaque result of one simulation run.
 */
typedef struct WsRun WsRun;

/**
 * One flow of a run.
 */
typedef struct WsFlow {
  uint64_t flow_id;
  /**
   * 0 = A (eMBB), 1 = B (mMTC), 2 = C (URLLC).
   */
  uint8_t slice;
  uint64_t tx_packets;
  uint64_t rx_packets;
  double pe;
  /**
   * Mean delay in seconds, NaN when nothing was delivered.
   */
  double latency_s;
} WsFlow;

/**
 * Run-level KPIs.
 */
typedef struct WsRunMetrics {
  double th_sum_bps;
  double bw_mhz;
  double mu;
  /**
   * NaN when the run has no slice-B stations.
   */
  double mean_tx_power_b_dbm;
  bool saturated;
} WsRunMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the calling thread's last failure, or null. Valid until its next failing call.
 */
const char *ws_last_error(void);

/**
 * Simulates one built-in setting (`"2-100-6"`, `"4-100-4"`, `"6-100-2"`)
 * under `strategy` (`"single"`, `"static"`, `"dynamic"`).
 *
 * `sim_time_s <= 0` keeps the default duration.
 *
 * # Safety
 * String arguments must be valid nul-terminated strings; `out` must be writable.
 */
enum WsStatus ws_run(const char *setting,
                     const char *strategy,
                     uint64_t seed,
                     double sim_time_s,
                     struct WsRun **out);

/**
 * Simulates a scenario given as a JSON object of fields overriding the
 * 4-100-4 defaults. `label` names the run in its id and CSV rows.
 *
 * # Safety
 * String arguments must be valid nul-terminated strings; `out` must be writable.
 */
enum WsStatus ws_run_json(const char *label,
                          const char *config_json,
                          const char *strategy,
                          uint64_t seed,
                          struct WsRun **out);

/**
 * Releases a run. Null is ignored.
 *
 * # Safety
 * `run` must be null or a handle from `ws_run`/`ws_run_json` not yet freed.
 */
void ws_run_free(struct WsRun *run);

/**
 * Number of flows in a run; 0 for null.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t ws_run_flow_count(const struct WsRun *run);

/**
 * # Safety
 * `run` must be null or a live handle; `out` must be writable.
 */
enum WsStatus ws_run_flow(const struct WsRun *run, size_t index, struct WsFlow *out);

/**
 * # Safety
 * `run` must be null or a live handle; `out` must be writable.
 */
enum WsStatus ws_run_metrics(const struct WsRun *run, struct WsRunMetrics *out);

/**
 * Writes the run's flows, runs and config-log CSVs into an existing directory.
 *
 * # Safety
 * `run` must be null or a live handle; `dir` a valid nul-terminated string.
 */
enum WsStatus ws_run_write_csv(const struct WsRun *run, const char *dir);

/**
 * Runs every setting and strategy over seeds 1..=20 and writes the CSVs into `out_dir`.
 *
 * `jobs == 0` uses all cores. `failed_runs` (nullable) receives the number of failed runs.
 *
 * # Safety
 * `out_dir` must be a valid nul-terminated string; `failed_runs` null or writable.
 */
enum WsStatus ws_sweep(const char *out_dir, uint32_t jobs, size_t *failed_runs);

/**
 * PHY rate in bit/s of one spatial stream.
 *
 * # Safety
 * `out` must be writable.
 */
enum WsStatus ws_data_rate(uint32_t width_mhz, uint8_t mcs, uint32_t gi_ns, double *out);

/**
 * Narrowest width carrying `demand_bps`; `saturated` is set when even 160 MHz falls short.
 *
 * # Safety
 * Out-pointers must be writable.
 */
enum WsStatus ws_cb_wmin(double demand_bps,
                         uint8_t mcs,
                         uint32_t gi_ns,
                         uint32_t *width_mhz,
                         bool *saturated);

/**
 * Lowest MCS carrying `demand_bps` at this width.
 *
 * # Safety
 * Out-pointers must be writable.
 */
enum WsStatus ws_mcs_min(double demand_bps,
                         uint32_t width_mhz,
                         uint32_t gi_ns,
                         uint8_t *mcs,
                         bool *saturated);

/**
 * Highest MCS meeting the 0.001 error target at this received power.
 *
 * # Safety
 * `out` must be writable.
 */
enum WsStatus ws_mcs_max(double rx_power_dbm, uint32_t width_mhz, uint8_t *out);

/**
 * Received power at which `mcs` just meets the error target.
 *
 * # Safety
 * `out` must be writable.
 */
enum WsStatus ws_p_rx_min(uint8_t mcs, uint32_t width_mhz, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIFI_SLICING_H */
