#ifndef UNCOMMON_H
#define UNCOMMON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Point list produced from the blurred interest map.
 */
#define UNC_SCALE_BLURRED 0

/**
 * Point list produced from the unblurred interest map.
 */
#define UNC_SCALE_RAW 1

/**
 * Result code of every fallible call.
 */
typedef enum {
  UNC_STATUS_OK = 0,
  UNC_STATUS_NULL_POINTER = 1,
  UNC_STATUS_INVALID_ARGUMENT = 2,
  UNC_STATUS_IO = 3,
  UNC_STATUS_FORMAT = 4,
  UNC_STATUS_DIMENSION = 5,
  UNC_STATUS_CONTRACT = 6,
  UNC_STATUS_DEGENERATE = 7,
  UNC_STATUS_UNDEFINED_RATES = 8,
  UNC_STATUS_MISMATCH = 9,
  UNC_STATUS_JSON = 10,
  UNC_STATUS_PANIC = 11,
} UncStatus;

/**
 * Opaque analysis result.
 */
typedef struct UncAnalysis UncAnalysis;

/**
 * Opaque RGB image.
 */
typedef struct UncImage UncImage;

/**
 * Pipeline parameters. Obtain defaults from [`unc_config_default`].
 */
typedef struct {
  size_t downsample_factor;
  size_t crop_width;
  size_t crop_height;
  size_t quantization_bins;
  double histogram_sigma;
  double min_peak_fraction;
  size_t max_classes;
  double blur_width;
  /**
   * Interest blur standard deviation; zero or less means `blur_width / 2`.
   */
  double blur_sigma;
  size_t top_k;
  double suppression_radius;
  double match_radius;
} UncConfig;

typedef struct {
  size_t x;
  size_t y;
  double score;
} UncPoint;

typedef struct {
  double tpr;
  double fpr;
  double fnr;
} UncRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *unc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *unc_version(void);

UncConfig unc_config_default(void);

/**
 * Load a PPM, PGM or PNG file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
UncStatus unc_image_load(const char *path, UncImage **out);

/**
 * Wrap interleaved 8-bit RGB samples (`width * height * 3` bytes).
 *
 * # Safety
 * `data` must point to `width * height * 3` readable bytes.
 */
UncStatus unc_image_from_rgb8(const uint8_t *data, size_t width, size_t height, UncImage **out);

/**
 * Downsample and center-crop according to `config`.
 *
 * # Safety
 * All pointers must be valid; `out` receives a new handle.
 */
UncStatus unc_image_preprocess(const UncImage *image, const UncConfig *config, UncImage **out);

/**
 * Width in pixels, or 0 for a null handle.
 *
 * # Safety
 * `image` must be null or a live handle.
 */
size_t unc_image_width(const UncImage *image);

/**
 * Height in pixels, or 0 for a null handle.
 *
 * # Safety
 * `image` must be null or a live handle.
 */
size_t unc_image_height(const UncImage *image);

/**
 * # Safety
 * `image` must be null or a handle not yet freed.
 */
void unc_image_free(UncImage *image);

/**
 * Run the detector on an already preprocessed image.
 *
 * # Safety
 * All pointers must be valid; `out` receives a new handle.
 */
UncStatus unc_analyze(const UncImage *image, const UncConfig *config, UncAnalysis **out);

/**
 * Number of points at `scale`, or 0 for a null handle or unknown scale.
 *
 * # Safety
 * `analysis` must be null or a live handle.
 */
size_t unc_analysis_point_count(const UncAnalysis *analysis, uint32_t scale);

/**
 * Copy point `index` (0 = strongest) at `scale` into `out`.
 *
 * # Safety
 * `analysis` must be a live handle and `out` writable.
 */
UncStatus unc_analysis_point(const UncAnalysis *analysis,
                             uint32_t scale,
                             size_t index,
                             UncPoint *out);

/**
 * True when the interest map at `scale` was constant, so the points are
 * tie-break positions only.
 *
 * # Safety
 * `analysis` must be null or a live handle.
 */
bool unc_analysis_is_degenerate(const UncAnalysis *analysis, uint32_t scale);

/**
 * Copy the unblurred interest map (row-major, values 0..=24) into `buf`,
 * which must hold at least `width * height` bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
UncStatus unc_analysis_copy_raw_interest(const UncAnalysis *analysis, uint8_t *buf, size_t len);

/**
 * Copy the blurred interest map (row-major) into `buf`, which must hold
 * at least `width * height` values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
UncStatus unc_analysis_copy_blurred_interest(const UncAnalysis *analysis, double *buf, size_t len);

/**
 * # Safety
 * `analysis` must be null or a handle not yet freed.
 */
void unc_analysis_free(UncAnalysis *analysis);

/**
 * Concurrence rates; all three share the denominator `tp + fp`.
 *
 * # Safety
 * `out` must be writable.
 */
UncStatus unc_compute_rates(size_t tp, size_t fp, size_t fn_count, UncRates *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNCOMMON_H */
