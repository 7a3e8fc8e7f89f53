#ifndef MARITIME_MEC_H
#define MARITIME_MEC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MmStatus {
  MM_STATUS_OK = 0,
  MM_STATUS_NULL_POINTER = 1,
  MM_STATUS_INVALID_UTF8 = 2,
  MM_STATUS_PARSE = 3,
  MM_STATUS_INVALID_CONFIG = 4,
  MM_STATUS_IO = 5,
  MM_STATUS_INFEASIBLE = 6,
  /**
   * The simulation already reached its horizon.
   */
  MM_STATUS_FINISHED = 7,
  MM_STATUS_PANIC = 8,
  MM_STATUS_INTERNAL = 9,
} MmStatus;

/**
 * Scenario configuration handle.
 */
typedef struct MmConfig MmConfig;

/**
 * Running simulation handle.
 */
typedef struct MmSimulation MmSimulation;

/**
 * Per-slot figures copied out of a step.
 */
typedef struct MmSlotStats {
  uint64_t slot;
  double throughput_bps;
  uint64_t total_queue;
  uint64_t processed_tasks;
  uint64_t migrated_tasks;
  uint64_t dropped_tasks;
  /**
   * Number of MISs whose energy request was clamped this slot.
   */
  uint32_t clamped_mis;
  double drift;
  double drift_bound;
} MmSlotStats;

/**
 * Run-level averages. Latency is negative when no task arrived.
 */
typedef struct MmSummary {
  uint64_t slots;
  uint64_t seed;
  double avg_throughput_bps;
  double avg_latency_slots;
  double avg_queue_tasks;
  double avg_energy_j;
  double max_final_z_over_t;
  double violation_rate;
  double violation_rate_final_half;
  uint64_t drift_violations;
} MmSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mm_version(void);

/**
 * Default scenario. Never returns null.
 */
struct MmConfig *mm_config_default(void);

/**
 * Parses and validates a TOML scenario; missing keys take defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MmStatus mm_config_from_toml(const char *toml, struct MmConfig **out);

/**
 * Loads and validates a TOML scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MmStatus mm_config_load(const char *path, struct MmConfig **out);

/**
 * Resolved configuration as TOML. Free the result with [`mm_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle or null.
 */
char *mm_config_to_toml(const struct MmConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live handle or null.
 */
enum MmStatus mm_config_set_seed(struct MmConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle or null.
 */
enum MmStatus mm_config_set_horizon(struct MmConfig *cfg, uint64_t slots);

/**
 * Policy by name: `jcora`, `fra`, `lra`, `pra` or `tra`.
 *
 * # Safety
 * `cfg` must be a live handle or null; `name` a NUL-terminated string.
 */
enum MmStatus mm_config_set_policy(struct MmConfig *cfg, const char *name);

/**
 * # Safety
 * `cfg` must be a live handle or null; `control_v` finite and nonnegative.
 */
enum MmStatus mm_config_set_control_v(struct MmConfig *cfg, double control_v);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is ignored.
 */
void mm_config_free(struct MmConfig *cfg);

/**
 * Starts a simulation from a copy of `cfg`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a writable pointer.
 */
enum MmStatus mm_simulation_new(const struct MmConfig *cfg, struct MmSimulation **out);

/**
 * Advances one slot. Returns [`MmStatus::Finished`] at the horizon.
 *
 * # Safety
 * `sim` must be a live handle; `out` writable or null.
 */
enum MmStatus mm_simulation_step(struct MmSimulation *sim, struct MmSlotStats *out);

/**
 * Runs the remaining slots and writes the summary.
 *
 * # Safety
 * `sim` must be a live handle; `out` writable or null.
 */
enum MmStatus mm_simulation_run(struct MmSimulation *sim, struct MmSummary *out);

/**
 * Summary of the slots simulated so far.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum MmStatus mm_simulation_summary(const struct MmSimulation *sim, struct MmSummary *out);

/**
 * Full summary as JSON. Free the result with [`mm_string_free`].
 *
 * # Safety
 * `sim` must be a live handle or null.
 */
char *mm_simulation_summary_json(const struct MmSimulation *sim);

/**
 * # Safety
 * `sim` must come from this library and not be used afterwards. Null is ignored.
 */
void mm_simulation_free(struct MmSimulation *sim);

/**
 * Certifies the scheduler against exhaustive search on `instances` random
 * small instances. Writes the number certified.
 *
 * # Safety
 * `certified` must be writable.
 */
enum MmStatus mm_validate(uint32_t instances, uint64_t seed, uint32_t *certified);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void mm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARITIME_MEC_H */
