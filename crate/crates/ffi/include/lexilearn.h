#ifndef LEXILEARN_H
#define LEXILEARN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LxStatus {
  LX_STATUS_OK = 0,
  LX_STATUS_NULL_POINTER = 1,
  LX_STATUS_INVALID_ARGUMENT = 2,
  LX_STATUS_CONFIG = 3,
  LX_STATUS_DATA = 4,
  LX_STATUS_DIVERGENCE = 5,
  LX_STATUS_PANIC = 6,
} LxStatus;

// An incrementally trained word co-occurrence network.
typedef struct LxCind LxCind;

// A trained comprehension model: linear map or deep network.
typedef struct LxModel LxModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *lx_last_error(void);

// Library version as a static NUL-terminated string.
const char *lx_version(void);

// Pearson correlation of two length-`n` vectors.
//
// # Safety
// `a` and `b` must point to `n` readable doubles and `out` to one writable double.
enum LxStatus lx_pearson(const double *a, const double *b, size_t n, double *out);

// Number of distinct words in `lexicon` that differ from `word` by one substitution.
//
// # Safety
// `word` must be a NUL-terminated string, `lexicon` must hold `n` of
// them and `out` must be writable.
enum LxStatus lx_ncount(const char *word, const char *const *lexicon, size_t n, size_t *out);

// Trainable parameter count of a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LxStatus lx_count_parameters(const char *path, size_t *out);

// Load a comprehension checkpoint (linear or deep).
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LxStatus lx_model_load(const char *path, struct LxModel **out);

// Release a model; null is ignored.
//
// # Safety
// `model` must come from [`lx_model_load`] and not be used afterwards.
void lx_model_free(struct LxModel *model);

// Input (cue) and output (semantic) dimensions of a model.
//
// # Safety
// `model` must be a live handle; `inputs` and `outputs` writable.
enum LxStatus lx_model_dims(const struct LxModel *model, size_t *inputs, size_t *outputs);

// Trainable parameter count of a loaded model.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum LxStatus lx_model_parameter_count(const struct LxModel *model, size_t *out);

// Predict semantic vectors for `rows` binary cue rows.
//
// `forms` is row-major `rows x inputs` with entries 0 or 1; `out` receives
// row-major `rows x outputs` and must hold `out_len` doubles.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum LxStatus lx_model_predict(const struct LxModel *model,
                               const double *forms,
                               size_t rows,
                               double *out,
                               size_t out_len);

// New empty co-occurrence network with learning rate `rate`.
//
// # Safety
// `out` must be writable.
enum LxStatus lx_cind_new(double rate, struct LxCind **out);

// Release a network; null is ignored.
//
// # Safety
// `cind` must come from [`lx_cind_new`] and not be used afterwards.
void lx_cind_free(struct LxCind *cind);

// One learning event on the `n` words of an utterance.
//
// # Safety
// `cind` must be a live handle and `words` must hold `n` NUL-terminated strings.
enum LxStatus lx_cind_update(struct LxCind *cind, const char *const *words, size_t n);

// Self-association weight of `word` (0 for unseen words).
//
// # Safety
// `cind` must be a live handle, `word` NUL-terminated and `out` writable.
enum LxStatus lx_cind_value(const struct LxCind *cind, const char *word, double *out);

// Weight from `cue` to `outcome` (0 if never stored).
//
// # Safety
// `cind` must be a live handle, both strings NUL-terminated and `out` writable.
enum LxStatus lx_cind_weight(const struct LxCind *cind,
                             const char *cue,
                             const char *outcome,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEXILEARN_H */
