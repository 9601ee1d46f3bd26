#ifndef SCBI_H
#define SCBI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ScbiStatus {
  SCBI_STATUS_OK = 0,
  SCBI_STATUS_NULL_POINTER = 1,
  SCBI_STATUS_DEGENERATE_VECTOR = 2,
  SCBI_STATUS_SUPPORT_MISMATCH = 3,
  SCBI_STATUS_DIMENSION_MISMATCH = 4,
  SCBI_STATUS_INVALID_PROBABILITY = 5,
  SCBI_STATUS_INVALID_MATRIX = 6,
  SCBI_STATUS_MARGINAL_MISMATCH = 7,
  SCBI_STATUS_NON_CONVERGENCE = 8,
  SCBI_STATUS_BOUNDARY_PRIOR = 9,
  SCBI_STATUS_INDEX_OUT_OF_RANGE = 10,
  SCBI_STATUS_TOO_FEW_HYPOTHESES = 11,
  SCBI_STATUS_TOO_MANY_ATOMS = 12,
  SCBI_STATUS_UNDERFLOW = 13,
  SCBI_STATUS_INVALID_CONFIG = 14,
  SCBI_STATUS_PARSE = 15,
  SCBI_STATUS_IO = 16,
  SCBI_STATUS_PANIC = 17,
} ScbiStatus;

// Learning rule for episodes.
typedef enum ScbiMode {
  SCBI_MODE_BI = 0,
  SCBI_MODE_SCBI = 1,
} ScbiMode;

// Opaque record of one teaching episode.
typedef struct ScbiEpisode ScbiEpisode;

// Opaque positive matrix.
typedef struct ScbiMatrix ScbiMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *scbi_last_error_message(void);

// Static name of a status code.
const char *scbi_status_name(enum ScbiStatus status);

// Build a `rows × cols` matrix from row-major `data`.
//
// # Safety
// `data` must point to `rows * cols` doubles; `out` must be writable.
enum ScbiStatus scbi_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct ScbiMatrix **out);

// Release a matrix. Null is ignored.
//
// # Safety
// `m` must come from this library and not be used afterwards.
void scbi_matrix_free(struct ScbiMatrix *m);

// # Safety
// `m` must be a live matrix; `rows` and `cols` must be writable.
enum ScbiStatus scbi_matrix_shape(const struct ScbiMatrix *m, size_t *rows, size_t *cols);

// Copy the entries, row-major, into `out` of length `len = rows * cols`.
//
// # Safety
// `m` must be a live matrix; `out` must hold `len` doubles.
enum ScbiStatus scbi_matrix_copy(const struct ScbiMatrix *m, double *out, size_t len);

// Scale `m` so its rows sum to `row_sums` and its columns to `col_sums`.
// `tolerance <= 0` and `max_iterations == 0` select the defaults.
//
// # Safety
// Array arguments must hold the stated number of doubles; `out` must be
// writable.
enum ScbiStatus scbi_sinkhorn(const struct ScbiMatrix *m,
                              const double *row_sums,
                              size_t n_rows,
                              const double *col_sums,
                              size_t n_cols,
                              double tolerance,
                              size_t max_iterations,
                              struct ScbiMatrix **out);

// Bayesian posterior after observing row `datum`. `theta` and `out` have
// one entry per column and may alias.
//
// # Safety
// `theta` and `out` must hold `len` doubles.
enum ScbiStatus scbi_bi_update(const struct ScbiMatrix *m,
                               const double *theta,
                               size_t len,
                               size_t datum,
                               double *out);

// Cooperative posterior after observing row `datum`.
//
// # Safety
// As [`scbi_bi_update`].
enum ScbiStatus scbi_scbi_update(const struct ScbiMatrix *m,
                                 const double *theta,
                                 size_t len,
                                 size_t datum,
                                 double *out);

// Asymptotic Bayesian rate toward hypothesis `h` and its minimizing column.
//
// # Safety
// `rate` and `argmin` must be writable; `argmin` may be null.
enum ScbiStatus scbi_roc_bi(const struct ScbiMatrix *m, size_t h, double *rate, size_t *argmin);

// Asymptotic cooperative rate toward hypothesis `h` and its minimizing column.
//
// # Safety
// As [`scbi_roc_bi`].
enum ScbiStatus scbi_roc_scbi(const struct ScbiMatrix *m, size_t h, double *rate, size_t *argmin);

// Run one seeded episode of `rounds` rounds toward hypothesis `h`. A null
// `learner` or `learner_prior` means the teacher's.
//
// # Safety
// Matrices must be live; priors must hold one double per column.
enum ScbiStatus scbi_episode_run(const struct ScbiMatrix *teacher,
                                 const struct ScbiMatrix *learner,
                                 const double *teacher_prior,
                                 const double *learner_prior,
                                 size_t len,
                                 size_t h,
                                 size_t rounds,
                                 enum ScbiMode mode,
                                 uint64_t seed,
                                 struct ScbiEpisode **out);

// Release an episode. Null is ignored.
//
// # Safety
// `e` must come from this library and not be used afterwards.
void scbi_episode_free(struct ScbiEpisode *e);

// Number of rounds played; returns 0 for null.
//
// # Safety
// `e` must be null or a live episode.
size_t scbi_episode_rounds(const struct ScbiEpisode *e);

// Copy the data indices, one per round, into `out`.
//
// # Safety
// `out` must hold `len` values, `len` equal to the number of rounds.
enum ScbiStatus scbi_episode_data(const struct ScbiEpisode *e, size_t *out, size_t len);

// Learner posterior after `round` rounds (0 is the prior).
//
// # Safety
// `out` must hold `len` doubles, one per hypothesis.
enum ScbiStatus scbi_episode_learner_posterior(const struct ScbiEpisode *e,
                                               size_t round,
                                               double *out,
                                               size_t len);

// The teacher's simulated learner state after `round` rounds.
//
// # Safety
// As [`scbi_episode_learner_posterior`].
enum ScbiStatus scbi_episode_teacher_posterior(const struct ScbiEpisode *e,
                                               size_t round,
                                               double *out,
                                               size_t len);

// Exact log-odds of the true hypothesis in the learner's state after
// `round` rounds.
//
// # Safety
// `e` must be a live episode; `out` must be writable.
enum ScbiStatus scbi_episode_learner_log_odds(const struct ScbiEpisode *e,
                                              size_t round,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCBI_H */
