#ifndef AVTABLE_H
#define AVTABLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AvStatus {
  AV_STATUS_OK = 0,
  AV_STATUS_NULL_POINTER = 1,
  AV_STATUS_INVALID_ARGUMENT = 2,
  AV_STATUS_INVALID_UTF8 = 3,
  AV_STATUS_BLOCK_SHAPE = 4,
  AV_STATUS_NUMERICAL = 5,
  AV_STATUS_SNAPSHOT = 6,
  AV_STATUS_IO = 7,
  AV_STATUS_PANIC = 99,
} AvStatus;

typedef enum AvDecision {
  AV_DECISION_CONTINUE = 0,
  AV_DECISION_REJECT = 1,
} AvDecision;

typedef enum AvEffect {
  AV_EFFECT_RISK_DIFFERENCE = 0,
  AV_EFFECT_RELATIVE_RISK = 1,
  AV_EFFECT_LOG_ODDS_RATIO = 2,
} AvEffect;

// Opaque confidence sequence over an effect-size grid.
typedef struct AvConfSeq AvConfSeq;

// Opaque plug-in e-process against one null.
typedef struct AvEProcess AvEProcess;

// Result of [`av_project`].
typedef struct AvProjection {
  double theta_a;
  double theta_b;
  double kl_value;
  // The star already lies in the null; the projection is the star.
  bool member;
} AvProjection;

// Hull of the surviving grid values. `lower` and `upper` are NaN when
// `empty` is set.
typedef struct AvInterval {
  double lower;
  double upper;
  bool empty;
  size_t n_alive;
  uint64_t blocks;
} AvInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// owned by the library and valid until the next failing call on the same
// thread.
const char *av_last_error(void);

// Library version as a static NUL-terminated string.
const char *av_version(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a pointer obtained from this library and not yet freed.
void av_string_free(char *s);

// Reverse information projection of `(star_a, star_b)` onto the null given
// by `null_token` (`equality`, `line:s:c`, `le:s:c`, `ge:s:c`, `lor-le:d` or
// `lor-ge:d`).
//
// # Safety
// `null_token` must be a NUL-terminated string; `out` must be valid for a write.
enum AvStatus av_project(const char *null_token,
                         double star_a,
                         double star_b,
                         uint32_t n_a,
                         uint32_t n_b,
                         struct AvProjection *out);

// Creates an e-process. `prior` is NULL for the default Beta(0.18, 0.18)
// prior on both groups, or four doubles `alpha_a, beta_a, alpha_b, beta_b`.
//
// # Safety
// `null_token` must be NUL-terminated; `prior` NULL or valid for four reads;
// `out` valid for a write.
enum AvStatus av_eprocess_new(const char *null_token,
                              uint32_t n_a,
                              uint32_t n_b,
                              const double *prior,
                              struct AvEProcess **out);

// Feeds one block of `n_a` group-a and `n_b` group-b outcomes (each 0 or 1).
// `increment` (nullable) receives the log e-value increment. On error the
// process is unchanged.
//
// # Safety
// `ep` must be a live handle; `ys_a`/`ys_b` valid for `len_a`/`len_b` reads.
enum AvStatus av_eprocess_update(struct AvEProcess *ep,
                                 const uint8_t *ys_a,
                                 size_t len_a,
                                 const uint8_t *ys_b,
                                 size_t len_b,
                                 double *increment);

// Current log e-value and number of blocks seen.
//
// # Safety
// `ep` must be a live handle; out-pointers valid for writes or NULL.
enum AvStatus av_eprocess_state(const struct AvEProcess *ep, double *log_e, uint64_t *blocks);

// Reject iff the current e-value is at least `1/alpha`.
//
// # Safety
// `ep` must be a live handle; `out` valid for a write.
enum AvStatus av_eprocess_decision(const struct AvEProcess *ep, double alpha, enum AvDecision *out);

// Serializes the process to text; free the result with [`av_string_free`].
//
// # Safety
// `ep` must be a live handle; `out` valid for a write.
enum AvStatus av_eprocess_snapshot(const struct AvEProcess *ep, char **out);

// Rebuilds a process from [`av_eprocess_snapshot`] output.
//
// # Safety
// `text` must be NUL-terminated; `out` valid for a write.
enum AvStatus av_eprocess_restore(const char *text, struct AvEProcess **out);

// Destroys a handle. NULL is ignored.
//
// # Safety
// `ep` must be NULL or a live handle, not used afterwards.
void av_eprocess_free(struct AvEProcess *ep);

// Creates a confidence sequence. `grid_token` is NULL for the effect's
// default grid, or `linear:lo:hi:step`, `log:lo:hi:points`, `list:v1,v2,...`.
//
// # Safety
// `grid_token` NULL or NUL-terminated; `prior` NULL or valid for four reads;
// `out` valid for a write.
enum AvStatus av_confseq_new(enum AvEffect effect,
                             double alpha,
                             uint32_t n_a,
                             uint32_t n_b,
                             const double *prior,
                             const char *grid_token,
                             struct AvConfSeq **out);

// Feeds one block to every live grid point.
//
// # Safety
// `cs` must be a live handle; `ys_a`/`ys_b` valid for `len_a`/`len_b` reads.
enum AvStatus av_confseq_update(struct AvConfSeq *cs,
                                const uint8_t *ys_a,
                                size_t len_a,
                                const uint8_t *ys_b,
                                size_t len_b);

// Current running-intersection interval.
//
// # Safety
// `cs` must be a live handle; `out` valid for a write.
enum AvStatus av_confseq_interval(const struct AvConfSeq *cs, struct AvInterval *out);

// Destroys a handle. NULL is ignored.
//
// # Safety
// `cs` must be NULL or a live handle, not used afterwards.
void av_confseq_free(struct AvConfSeq *cs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AVTABLE_H */
