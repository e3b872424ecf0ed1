#ifndef BANDITMT_H
#define BANDITMT_H

#pragma once

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BmtScale {
  BMT_SCALE_NOMINAL = 0,
  BMT_SCALE_ORDINAL = 1,
  BMT_SCALE_INTERVAL = 2,
} BmtScale;

typedef enum BmtStatus {
  BMT_STATUS_OK = 0,
  BMT_STATUS_NULL_POINTER = 1,
  BMT_STATUS_INVALID_UTF8 = 2,
  BMT_STATUS_INVALID_INPUT = 3,
  BMT_STATUS_PARSE = 4,
  BMT_STATUS_UNDEFINED_ALPHA = 5,
  BMT_STATUS_NUMERICAL = 6,
  BMT_STATUS_IO = 7,
  BMT_STATUS_NOT_FOUND = 8,
  BMT_STATUS_PANIC = 9,
} BmtStatus;

// Trained reward estimator.
typedef struct BmtEstimator BmtEstimator;

// Raters x units reliability data.
typedef struct BmtMatrix BmtMatrix;

// Translation policy.
typedef struct BmtPolicy BmtPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *bmt_last_error(void);

// Library version, static storage.
const char *bmt_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void bmt_string_free(char *s);

// # Safety
// `out` must be a valid pointer.
enum BmtStatus bmt_matrix_new(enum BmtScale scale, struct BmtMatrix **out);

// Parses the JSON form `{"scale": ..., "entries": [{"rater", "unit", "value"}]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum BmtStatus bmt_matrix_from_json(const char *json, struct BmtMatrix **out);

// Adds one value; a rater may give several values for a unit.
//
// # Safety
// `m` must be a live matrix handle; strings NUL-terminated.
enum BmtStatus bmt_matrix_add(struct BmtMatrix *m,
                              const char *rater,
                              const char *unit,
                              double value);

// # Safety
// `m` must be a live matrix handle and `out` valid.
enum BmtStatus bmt_matrix_alpha(const struct BmtMatrix *m, double *out);

// New matrix with every rater's values standardized.
//
// # Safety
// `m` must be a live matrix handle and `out` valid.
enum BmtStatus bmt_matrix_zscore(const struct BmtMatrix *m, struct BmtMatrix **out);

// # Safety
// `m` must come from this library and not have been freed; null is ignored.
void bmt_matrix_free(struct BmtMatrix *m);

// Smoothed sentence BLEU in [0, 1].
//
// # Safety
// Strings NUL-terminated, `out` valid.
enum BmtStatus bmt_sbleu(const char *hyp, const char *reference, double *out);

// Sentence GLEU in [0, 1].
//
// # Safety
// Strings NUL-terminated, `out` valid.
enum BmtStatus bmt_gleu(const char *hyp, const char *reference, double *out);

// Character n-gram F-score in [0, 1].
//
// # Safety
// Strings NUL-terminated, `out` valid.
enum BmtStatus bmt_chrf(const char *hyp, const char *reference, double *out);

// Translation edit rate; the reference must be non-empty.
//
// # Safety
// Strings NUL-terminated, `out` valid.
enum BmtStatus bmt_ter(const char *hyp, const char *reference, double *out);

// # Safety
// `path` NUL-terminated, `out` valid.
enum BmtStatus bmt_estimator_load(const char *path, struct BmtEstimator **out);

// Raw estimator output for a source/translation pair.
//
// # Safety
// `e` a live handle, strings NUL-terminated, `out` valid.
enum BmtStatus bmt_estimator_predict(const struct BmtEstimator *e,
                                     const char *source,
                                     const char *target,
                                     double *out);

// # Safety
// `e` must come from this library and not have been freed; null is ignored.
void bmt_estimator_free(struct BmtEstimator *e);

// # Safety
// `path` NUL-terminated, `out` valid.
enum BmtStatus bmt_policy_load(const char *path, struct BmtPolicy **out);

// Greedy translation; release `*out` with [`bmt_string_free`].
//
// # Safety
// `p` a live handle, `source` NUL-terminated, `out` valid.
enum BmtStatus bmt_policy_translate(const struct BmtPolicy *p, const char *source, char **out);

// Log-probability of `target` given `source`, including end of sentence.
//
// # Safety
// `p` a live handle, strings NUL-terminated, `out` valid.
enum BmtStatus bmt_policy_log_prob(const struct BmtPolicy *p,
                                   const char *source,
                                   const char *target,
                                   double *out);

// # Safety
// `p` must come from this library and not have been freed; null is ignored.
void bmt_policy_free(struct BmtPolicy *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANDITMT_H */
