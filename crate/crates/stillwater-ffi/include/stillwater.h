#ifndef STILLWATER_H
#define STILLWATER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every FFI call.
 */
typedef enum {
  SW_OK = 0,
  /**
   * Null pointer, malformed string, or invalid configuration.
   */
  SW_INVALID_ARGUMENT = 1,
  /**
   * I/O failure or malformed data.
   */
  SW_DATA_ERROR = 2,
  /**
   * The solver failed to produce a finite answer.
   */
  SW_NUMERICAL_ERROR = 3,
  /**
   * An internal invariant was violated.
   */
  SW_INTERNAL_ERROR = 4,
} SwStatus;

/**
 * An opaque single-image handle.
 */
typedef struct SwFrame SwFrame;

/**
 * An opaque video handle.
 */
typedef struct SwVideo SwVideo;

/**
 * Scores of a restoration against a clean reference. Fields that could not
 * be computed are NaN.
 */
typedef struct {
  double rmse;
  double nmi;
  double ssim;
  double motion_reduction_percent;
  double sigma_motion_px;
} SwQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the most recent failure on this thread into `buf`
 * (NUL-terminated, truncated to `len`). Returns the full message length.
 */
uintptr_t sw_last_error(char *buf, uintptr_t len);

/**
 * Loads a numbered PNG sequence directory into a new video handle.
 */
SwStatus sw_video_load(const char *dir, SwVideo **out);

/**
 * Builds a video handle from packed row-major grayscale frames in [0, 1].
 * `data` must hold `width * height * frame_count` floats.
 */
SwStatus sw_video_from_frames(const float *data,
                              uintptr_t width,
                              uintptr_t height,
                              uintptr_t frame_count,
                              float fps,
                              SwVideo **out);

/**
 * Writes the video as a numbered PNG sequence directory.
 */
SwStatus sw_video_save(const SwVideo *video, const char *dir);

/**
 * Reads the dimensions of a video handle.
 */
SwStatus sw_video_dims(const SwVideo *video,
                       uintptr_t *width,
                       uintptr_t *height,
                       uintptr_t *frame_count);

void sw_video_free(SwVideo *video);

/**
 * Copies one frame's pixels into `buf` (`width * height` floats).
 */
SwStatus sw_frame_read(const SwFrame *frame, float *buf, uintptr_t len);

SwStatus sw_frame_dims(const SwFrame *frame, uintptr_t *width, uintptr_t *height);

void sw_frame_free(SwFrame *frame);

/**
 * Restores a distorted video. `config_toml` may be NULL for defaults; see
 * the library documentation for the schema. On success `*out_restored`
 * holds the restored video and, if non-NULL, `*out_mean` the aggregated
 * still image.
 */
SwStatus sw_restore(const SwVideo *video,
                    const char *config_toml,
                    SwVideo **out_restored,
                    SwFrame **out_mean);

/**
 * Scores a restored video against a clean reference (the first frame of
 * `clean` if it is a video handle is not accepted here; pass a single
 * frame produced by `sw_restore` or loaded separately). Missing metrics
 * are returned as NaN.
 */
SwStatus sw_evaluate(const SwFrame *clean,
                     const SwVideo *distorted,
                     const SwVideo *restored,
                     const char *config_toml,
                     SwQuality *out);

/**
 * Loads a single grayscale PNG into a frame handle.
 */
SwStatus sw_frame_load(const char *path, SwFrame **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STILLWATER_H */
