/* C ABI for the mocal motion calibration toolkit. */

#ifndef MOCAL_H
#define MOCAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum McStatus {
  McStatusOk = 0,
  McStatusInvalidArgument = 1,
  McStatusIo = 2,
  McStatusParse = 3,
  McStatusShape = 4,
  McStatusInternal = 5,
} McStatus;

/**
 * Opaque calibrator handle.
 */
typedef struct McModel McModel;

/**
 * Opaque motion record handle.
 */
typedef struct McMotion McMotion;

/**
 * Contact-physics metrics of one motion.
 */
typedef struct McContactMetrics {
  /**
   * Fraction of contact frames with horizontal foot travel above 2.5 cm.
   */
  double skate_ratio;
  /**
   * Mean positive clearance of the lowest joint on contact frames, meters.
   */
  double float_mean;
  /**
   * Mean ground penetration depth on contact frames, meters.
   */
  double penetrate_mean;
  /**
   * Mean inter-foot interpenetration depth, meters.
   */
  double clip_mean;
} McContactMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mc_last_error_message(void);

/**
 * Read one motion record from a JSON interchange file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum McStatus mc_motion_read(const char *path, struct McMotion **out);

/**
 * Write one motion record as a JSON interchange file.
 *
 * # Safety
 * `motion` must be a live handle and `path` a valid NUL-terminated string.
 */
enum McStatus mc_motion_write(const struct McMotion *motion, const char *path);

/**
 * Release a motion handle. Null is a no-op.
 *
 * # Safety
 * `motion` must be a handle returned by this library, not yet freed.
 */
void mc_motion_free(struct McMotion *motion);

/**
 * Number of frames, or 0 for a null handle.
 *
 * # Safety
 * `motion` must be a live handle or null.
 */
uintptr_t mc_motion_frame_count(const struct McMotion *motion);

/**
 * Number of joints, or 0 for a null handle.
 *
 * # Safety
 * `motion` must be a live handle or null.
 */
uintptr_t mc_motion_joint_count(const struct McMotion *motion);

/**
 * Frames per second, or 0 for a null handle.
 *
 * # Safety
 * `motion` must be a live handle or null.
 */
double mc_motion_fps(const struct McMotion *motion);

/**
 * Apply a vertical bias (meters) and temporal Gaussian smoothing (frames) to
 * a motion, producing a new handle with provenance "distorted".
 *
 * # Safety
 * `motion` must be a live handle and `out` a valid pointer.
 */
enum McStatus mc_motion_distort(const struct McMotion *motion,
                                double bias,
                                double sigma,
                                struct McMotion **out);

/**
 * Contact metrics of a motion at the default thresholds.
 *
 * # Safety
 * `motion` must be a live handle and `out` a valid pointer.
 */
enum McStatus mc_motion_contact_metrics(const struct McMotion *motion,
                                        struct McContactMetrics *out);

/**
 * Load a calibrator checkpoint.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum McStatus mc_model_load(const char *path, struct McModel **out);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a handle returned by this library, not yet freed.
 */
void mc_model_free(struct McModel *model);

/**
 * Refine a motion through a loaded calibrator: iteratively over `t_hat`
 * steps for residual checkpoints, one step for direct ones. The motion must
 * carry a condition vector.
 *
 * # Safety
 * `model` and `motion` must be live handles and `out` a valid pointer.
 */
enum McStatus mc_refine(const struct McModel *model,
                        const struct McMotion *motion,
                        uint32_t t_hat,
                        struct McMotion **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOCAL_H */
