#ifndef PROSODY_H
#define PROSODY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ProsodyStatus {
  PROSODY_STATUS_OK = 0,
  PROSODY_STATUS_NULL_POINTER = 1,
  PROSODY_STATUS_INVALID_ARGUMENT = 2,
  PROSODY_STATUS_BUFFER_TOO_SMALL = 3,
  PROSODY_STATUS_IO = 4,
  PROSODY_STATUS_AUDIO = 5,
  PROSODY_STATUS_MODEL = 6,
  PROSODY_STATUS_DIMENSION_MISMATCH = 7,
  PROSODY_STATUS_DATA = 8,
  PROSODY_STATUS_PANIC = 9,
} ProsodyStatus;

/**
 * Opaque handle to a trained classifier.
 */
typedef struct ProsodyModel ProsodyModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length of a clip feature vector (136).
 */
size_t prosody_feature_count(void);

/**
 * Message for the last failed call on this thread, or null if the last
 * call succeeded. Valid until the next call into the library on the same
 * thread.
 */
const char *prosody_last_error(void);

/**
 * Extracts the clip vector from `n_samples` mono samples in `[-1, 1]` at
 * `sample_rate` Hz, using the default window settings. Audio at other
 * rates is resampled to 16 kHz first. `out` must hold at least
 * [`prosody_feature_count`] values.
 *
 * # Safety
 * `samples` must point to `n_samples` readable doubles and `out` to
 * `out_len` writable doubles.
 */
enum ProsodyStatus prosody_extract_samples(const double *samples,
                                           size_t n_samples,
                                           uint32_t sample_rate,
                                           double *out,
                                           size_t out_len);

/**
 * Like [`prosody_extract_samples`], reading a PCM WAV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must point to
 * `out_len` writable doubles.
 */
enum ProsodyStatus prosody_extract_wav(const char *path, double *out, size_t out_len);

/**
 * Loads a model saved by the command-line tool. On success `*model`
 * receives a handle to release with [`prosody_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `model` a writable pointer.
 */
enum ProsodyStatus prosody_model_load(const char *path, struct ProsodyModel **model);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `model` a writable pointer.
 */
enum ProsodyStatus prosody_model_from_json(const char *json, struct ProsodyModel **model);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void prosody_model_free(struct ProsodyModel *model);

/**
 * Number of classes the model predicts, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t prosody_model_class_count(const struct ProsodyModel *model);

/**
 * Input length the model expects, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t prosody_model_feature_count(const struct ProsodyModel *model);

/**
 * Predicts the class code for one feature vector.
 *
 * # Safety
 * `model` must be a live handle, `features` must point to `n_features`
 * readable doubles and `class_code` must be writable.
 */
enum ProsodyStatus prosody_model_predict(const struct ProsodyModel *model,
                                         const double *features,
                                         size_t n_features,
                                         size_t *class_code);

/**
 * Writes the per-class scores for one feature vector into `scores`, which
 * must hold at least [`prosody_model_class_count`] values.
 *
 * # Safety
 * As for [`prosody_model_predict`]; `scores` must point to `scores_len`
 * writable doubles.
 */
enum ProsodyStatus prosody_model_scores(const struct ProsodyModel *model,
                                        const double *features,
                                        size_t n_features,
                                        double *scores,
                                        size_t scores_len);

/**
 * Name of emotion `code` (0..20), or null when out of range. The string is
 * static.
 */
const char *prosody_emotion_name(size_t code);

/**
 * Name of quadrant `code` (0..4), or null when out of range.
 */
const char *prosody_quadrant_name(size_t code);

/**
 * Parses an emotion name, case-insensitively, into its code.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `code` writable.
 */
enum ProsodyStatus prosody_emotion_code(const char *name, size_t *code);

/**
 * Quadrant code of emotion `emotion_code`.
 *
 * # Safety
 * `quadrant_code` must be writable.
 */
enum ProsodyStatus prosody_quadrant_of(size_t emotion_code, size_t *quadrant_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROSODY_H */
