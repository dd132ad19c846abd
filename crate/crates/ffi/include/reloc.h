#ifndef RELOC_H
#define RELOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RelocStatus {
  RELOC_STATUS_OK = 0,
  RELOC_STATUS_NULL_ARG = 1,
  RELOC_STATUS_INVALID_ARG = 2,
  RELOC_STATUS_IO = 3,
  RELOC_STATUS_PARSE = 4,
  RELOC_STATUS_INFEASIBLE = 5,
  RELOC_STATUS_NO_VALID_BEAMS = 6,
  RELOC_STATUS_INTERNAL = 99,
} RelocStatus;

/**
 * Opaque occupancy grid.
 */
typedef struct RelocMap RelocMap;

/**
 * Opaque range scan.
 */
typedef struct RelocScan RelocScan;

typedef struct RelocPose {
  double x;
  double y;
  double theta;
} RelocPose;

typedef struct RelocMapInfo {
  size_t width;
  size_t height;
  double resolution;
  struct RelocPose origin;
  size_t occupied_cells;
  size_t free_cells;
  size_t unknown_cells;
} RelocMapInfo;

typedef struct RelocLidarModel {
  /**
   * Radians.
   */
  double fov;
  double angle_increment;
  double range_max;
  double noise_sigma;
  /**
   * Probability in `[0, 1)` that a beam is reported invalid.
   */
  double dropout;
} RelocLidarModel;

typedef struct RelocResult {
  struct RelocPose pose;
  double confidence;
  bool terminated_early;
  size_t batches_processed;
  size_t hypotheses_evaluated;
  size_t hypothesis_count;
} RelocResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a map from a YAML descriptor and its raster.
 *
 * # Safety
 * `yaml_path` must be a valid C string; `out` must be writable.
 */
enum RelocStatus reloc_map_load(const char *yaml_path, struct RelocMap **out);

/**
 * Generates a synthetic map. `kind` is one of `empty_room`,
 * `cluttered_office`, `corridor_loop` or `split_rooms`.
 *
 * # Safety
 * `kind` must be a valid C string; `out` must be writable.
 */
enum RelocStatus reloc_map_generate(const char *kind,
                                    double width,
                                    double height,
                                    double resolution,
                                    uint64_t seed,
                                    struct RelocMap **out);

/**
 * # Safety
 * `map` must be NULL or a handle obtained from this library and not yet freed.
 */
void reloc_map_free(struct RelocMap *map);

/**
 * # Safety
 * `map` must be a live handle; `out` must be writable.
 */
enum RelocStatus reloc_map_info(const struct RelocMap *map, struct RelocMapInfo *out);

/**
 * Builds a scan from `len` ranges. Ranges outside `(0, range_max]` or
 * non-finite become invalid beams.
 *
 * # Safety
 * `ranges` must point to `len` readable doubles (it may be NULL when `len` is 0);
 * `out` must be writable.
 */
enum RelocStatus reloc_scan_new(double angle_min,
                                double angle_increment,
                                double range_max,
                                const double *ranges,
                                size_t len,
                                struct RelocScan **out);

/**
 * Loads a scan from its JSON form.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum RelocStatus reloc_scan_load(const char *path, struct RelocScan **out);

/**
 * # Safety
 * `scan` must be NULL or a handle obtained from this library and not yet freed.
 */
void reloc_scan_free(struct RelocScan *scan);

/**
 * Number of beams (valid or not) in `scan`, or 0 for NULL.
 *
 * # Safety
 * `scan` must be NULL or a live handle.
 */
size_t reloc_scan_len(const struct RelocScan *scan);

/**
 * Copies up to `capacity` ranges into `buf`; invalid beams are written as NaN.
 * `written` receives the number of values copied.
 *
 * # Safety
 * `scan` must be a live handle; `buf` must hold `capacity` doubles; `written` must be writable.
 */
enum RelocStatus reloc_scan_ranges(const struct RelocScan *scan,
                                   double *buf,
                                   size_t capacity,
                                   size_t *written);

/**
 * Fills `out` with the default sensor model (220° field of view, 1° steps,
 * 20 m range, 0.02 m noise, 2% dropout).
 *
 * # Safety
 * `out` must be writable.
 */
enum RelocStatus reloc_lidar_default(struct RelocLidarModel *out);

/**
 * Simulates a scan taken at `pose`. A NULL `lidar` selects the default model.
 *
 * # Safety
 * `map` must be a live handle; `lidar` must be NULL or readable; `out` must be writable.
 */
enum RelocStatus reloc_simulate_scan(const struct RelocMap *map,
                                     struct RelocPose pose,
                                     const struct RelocLidarModel *lidar,
                                     uint64_t seed,
                                     struct RelocScan **out);

/**
 * Runs global relocalization. `config_json` may be NULL for defaults; it
 * otherwise holds a JSON object whose fields override the defaults.
 *
 * # Safety
 * `map` and `scan` must be live handles; `config_json` must be NULL or a
 * valid C string; `out` must be writable.
 */
enum RelocStatus reloc_relocalize(const struct RelocMap *map,
                                  const struct RelocScan *scan,
                                  const char *config_json,
                                  uint64_t seed,
                                  struct RelocResult *out);

/**
 * Message describing the most recent failure on this thread, or NULL if the
 * last call succeeded. The pointer stays valid until the next call into
 * this library from the same thread.
 */
const char *reloc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *reloc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELOC_H */
