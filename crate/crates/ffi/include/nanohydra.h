#ifndef NANOHYDRA_H
#define NANOHYDRA_H

#include <stddef.h>
#include <stdint.h>

typedef enum NhStatus {
  NH_STATUS_OK = 0,
  NH_STATUS_NULL_POINTER = 1,
  NH_STATUS_INVALID_ARGUMENT = 2,
  NH_STATUS_IO = 3,
  NH_STATUS_FORMAT = 4,
  NH_STATUS_SHAPE = 5,
  NH_STATUS_BUFFER_TOO_SMALL = 6,
  NH_STATUS_PANIC = 7,
} NhStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct NhModel NhModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nh_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *nh_last_error_message(void);

/**
 * Loads a model file. On success `*out` owns a handle to release with
 * [`nh_model_free`].
 */
enum NhStatus nh_model_load(const char *path, struct NhModel **out);

/**
 * Loads a model from an in-memory buffer.
 */
enum NhStatus nh_model_load_bytes(const uint8_t *data, size_t len, struct NhModel **out);

/**
 * Releases a handle. NULL is accepted.
 */
void nh_model_free(struct NhModel *model);

/**
 * Expected number of samples per input window; 0 for NULL.
 */
size_t nh_model_input_len(const struct NhModel *model);

size_t nh_model_num_classes(const struct NhModel *model);

size_t nh_model_feature_len(const struct NhModel *model);

/**
 * Serialized model size in bytes; 0 for NULL.
 */
size_t nh_model_size_bytes(const struct NhModel *model);

/**
 * Classifies one window of raw samples. `scores` may be NULL; otherwise
 * it receives `nh_model_num_classes` int32 scores and `scores_cap` must be
 * at least that.
 */
enum NhStatus nh_model_predict(const struct NhModel *model,
                               const double *samples,
                               size_t len,
                               uint32_t *class_out,
                               int32_t *scores,
                               size_t scores_cap);

/**
 * Writes the scaled int16 feature vector (the classifier input) of one
 * window. `cap` must be at least `nh_model_feature_len`.
 */
enum NhStatus nh_model_extract_features(const struct NhModel *model,
                                        const double *samples,
                                        size_t len,
                                        int16_t *out,
                                        size_t cap);

/**
 * Average power in µW of a duty-cycled node. Powers in µW, times in s.
 */
enum NhStatus nh_avg_power_uw(double p_inf,
                              double p_sleep,
                              double p_adc,
                              double dt_inf,
                              double dt_acq,
                              double *out);

/**
 * Years of operation at `avg_uw` from a battery of the given capacity and
 * voltage.
 */
enum NhStatus nh_lifetime_years(double avg_uw, double capacity_mah, double voltage, double *out);

/**
 * Relative energy per inference from power and latency ratios.
 */
double nh_energy_ratio(double power_ratio, double latency_ratio);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NANOHYDRA_H */
