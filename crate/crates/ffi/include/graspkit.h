#ifndef GRASPKIT_H
#define GRASPKIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_NULL_ARGUMENT = 1,
  GK_STATUS_INVALID_ARGUMENT = 2,
  GK_STATUS_IO = 3,
  GK_STATUS_MODEL = 4,
  GK_STATUS_NO_ELEMENTS_DETECTED = 5,
  GK_STATUS_PANIC = 6,
} GkStatus;

/**
 * Opaque decomposer handle.
 */
typedef struct GkDecomposer GkDecomposer;

/**
 * Opaque grasp network handle.
 */
typedef struct GkGraspNet GkGraspNet;

/**
 * Oriented grasp rectangle in pixels and degrees.
 */
typedef struct GkGrasp {
  double cx;
  double cy;
  double theta_deg;
  double width_px;
  double height_px;
} GkGrasp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *gk_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gk_version(void);

/**
 * Loads a decomposer artifact directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GkStatus gk_decomposer_load(const char *path, struct GkDecomposer **out);

/**
 * Releases a decomposer; null is ignored.
 *
 * # Safety
 * `handle` must come from [`gk_decomposer_load`] and not be used afterwards.
 */
void gk_decomposer_free(struct GkDecomposer *handle);

/**
 * Loads a grasp network artifact directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GkStatus gk_graspnet_load(const char *path, struct GkGraspNet **out);

/**
 * Releases a grasp network; null is ignored.
 *
 * # Safety
 * `handle` must come from [`gk_graspnet_load`] and not be used afterwards.
 */
void gk_graspnet_free(struct GkGraspNet *handle);

/**
 * Number of elements found at confidence `mdc` (0 to 3).
 *
 * # Safety
 * `rgb` must point to `width * height * 3` bytes; the other pointers must
 * be valid.
 */
enum GkStatus gk_decompose_count(const struct GkDecomposer *decomposer,
                                 const uint8_t *rgb,
                                 uint32_t width,
                                 uint32_t height,
                                 double mdc,
                                 uint32_t *out_count);

/**
 * Decomposes the object image and predicts one grasp for the approach.
 * Returns [`GkStatus::NoElementsDetected`] when nothing passes `mdc`.
 *
 * # Safety
 * Both images must point to `width * height * 3` bytes; the other pointers
 * must be valid.
 */
enum GkStatus gk_infer(const struct GkDecomposer *decomposer,
                       const struct GkGraspNet *graspnet,
                       const uint8_t *object_rgb,
                       const uint8_t *approach_rgb,
                       uint32_t width,
                       uint32_t height,
                       double mdc,
                       struct GkGrasp *out);

/**
 * Intersection over union of two grasp rectangles.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GkStatus gk_jaccard(const struct GkGrasp *a, const struct GkGrasp *b, double *out);

/**
 * Rectangle-metric success of `predicted` against `truth`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GkStatus gk_grasp_success(const struct GkGrasp *predicted,
                               const struct GkGrasp *truth,
                               double jaccard_threshold,
                               double angle_threshold_deg,
                               bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRASPKIT_H */
