#ifndef PACO_H
#define PACO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PacoStatus {
  PACO_STATUS_OK = 0,
  PACO_STATUS_NULL_POINTER = 1,
  PACO_STATUS_INVALID_ARGUMENT = 2,
  PACO_STATUS_IO = 3,
  PACO_STATUS_FORMAT = 4,
  PACO_STATUS_OUT_OF_RANGE = 5,
  PACO_STATUS_NOT_FOUND = 6,
  PACO_STATUS_BUFFER_TOO_SMALL = 7,
  PACO_STATUS_INTERNAL = 8,
} PacoStatus;

// Opaque loaded model.
typedef struct PacoModelHandle PacoModelHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *paco_last_error(void);

// Library version as a static NUL-terminated string.
const char *paco_version(void);

// Loads a model file. On success `*out` receives a new handle.
enum PacoStatus paco_model_load(const char *path, struct PacoModelHandle **out);

// Decodes a model from `len` bytes in memory.
enum PacoStatus paco_model_from_bytes(const uint8_t *data,
                                      size_t len,
                                      struct PacoModelHandle **out);

// Writes the model to `path`.
enum PacoStatus paco_model_save(const struct PacoModelHandle *model, const char *path);

// Releases a handle. Null is ignored.
void paco_model_free(struct PacoModelHandle *model);

// Number of users, items and vocabulary words. Any out pointer may be null.
enum PacoStatus paco_model_dims(const struct PacoModelHandle *model,
                                size_t *n_users,
                                size_t *n_items,
                                size_t *vocab_size);

// Description length of the stencils in bits.
enum PacoStatus paco_model_size_bits(const struct PacoModelHandle *model, uint64_t *bits);

// Dense index of an external user id.
enum PacoStatus paco_model_user_index(const struct PacoModelHandle *model,
                                      const char *id,
                                      uint32_t *index);

// Dense index of an external item id.
enum PacoStatus paco_model_item_index(const struct PacoModelHandle *model,
                                      const char *id,
                                      uint32_t *index);

// Predicted rating on the native scale.
enum PacoStatus paco_model_predict(const struct PacoModelHandle *model,
                                   uint32_t user,
                                   uint32_t item,
                                   double *rating);

// Predicts `n` pairs. Fails without writing anything if any pair is out of range.
enum PacoStatus paco_model_predict_batch(const struct PacoModelHandle *model,
                                         const uint32_t *users,
                                         const uint32_t *items,
                                         size_t n,
                                         double *ratings);

// Full Poisson rate vector of a review, one entry per vocabulary word.
// `len` must be at least the vocabulary size; otherwise `BufferTooSmall` is
// returned and the required length is reported in the error message.
enum PacoStatus paco_model_rate_vector(const struct PacoModelHandle *model,
                                       uint32_t user,
                                       uint32_t item,
                                       double *rates,
                                       size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACO_H */
