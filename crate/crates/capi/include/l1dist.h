#ifndef L1DIST_H
#define L1DIST_H

/* Generated by cbindgen from l1dist-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every `l1d_` function.
typedef enum L1dStatus {
  L1D_STATUS_OK = 0,
  L1D_STATUS_NULL_POINTER = 1,
  L1D_STATUS_INVALID_ARGUMENT = 2,
  L1D_STATUS_LENGTH_MISMATCH = 3,
  L1D_STATUS_RATE_TOO_SMALL = 4,
  L1D_STATUS_DEGREE_CAP = 5,
  L1D_STATUS_NUMERIC_FAILURE = 6,
} L1dStatus;

// How the optimal constructions split counts between classification and
// estimation.
typedef enum L1dSplitMode {
  L1D_SPLIT_MODE_THINNING = 0,
  L1D_SPLIT_MODE_REUSE = 1,
} L1dSplitMode;

// Opaque estimator configuration; create with `l1d_config_new`, release
// with `l1d_config_free`.
typedef struct L1dConfig L1dConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code.
const char *l1d_status_message(enum L1dStatus status);

// Library version as a static C string.
const char *l1d_version(void);

// Allocates a configuration with the default constants
// (c1 = 2.0, c2 = 0.3, c3 = 0.6, thinning, seed 0).
struct L1dConfig *l1d_config_new(void);

// Releases a configuration. Passing NULL is a no-op.
//
// # Safety
// `cfg` must be NULL or a pointer obtained from `l1d_config_new` that has
// not been freed yet.
void l1d_config_free(struct L1dConfig *cfg);

// Sets the tuning constants; requires `c1 > c3 > c2 > 0`.
//
// # Safety
// `cfg` must be a live handle from `l1d_config_new`.
enum L1dStatus l1d_config_set_constants(struct L1dConfig *cfg, double c1, double c2, double c3);

// Selects the splitting mode.
//
// # Safety
// `cfg` must be a live handle from `l1d_config_new`.
enum L1dStatus l1d_config_set_split_mode(struct L1dConfig *cfg, enum L1dSplitMode mode);

// Sets the seed used for binomial thinning.
//
// # Safety
// `cfg` must be a live handle from `l1d_config_new`.
enum L1dStatus l1d_config_set_seed(struct L1dConfig *cfg, uint64_t seed);

// Exact L1 distance between two weight vectors (normalized on entry).
//
// # Safety
// `p` and `q` must point to `len` doubles; `out` must be writable.
enum L1dStatus l1d_l1_exact(const double *p, const double *q, size_t len, double *out);

// Plug-in MLE with known `Q`.
//
// # Safety
// `counts` holds `len` uint64 counts, `q` holds `len` weights, `out` is
// writable.
enum L1dStatus l1d_mle_known_q(const uint64_t *counts,
                               size_t len,
                               double rate_n,
                               const double *q,
                               double *out);

// Plug-in MLE from two count buffers sharing one rate.
//
// # Safety
// `x` and `y` hold `len` uint64 counts; `out` is writable.
enum L1dStatus l1d_mle_unknown_q(const uint64_t *x,
                                 const uint64_t *y,
                                 size_t len,
                                 double rate_n,
                                 double *out);

// Minimax-rate-optimal estimator with known `Q`; clipped to `[0, 2]`.
//
// # Safety
// `cfg` is a live handle (or NULL for defaults); buffers as in
// `l1d_mle_known_q`.
enum L1dStatus l1d_estimate_known_q(const struct L1dConfig *cfg,
                                    const uint64_t *counts,
                                    size_t len,
                                    double rate_n,
                                    const double *q,
                                    double *out);

// Minimax-rate-optimal estimator with both sides sampled; clipped to
// `[0, 2]`.
//
// # Safety
// `cfg` is a live handle (or NULL for defaults); buffers as in
// `l1d_mle_unknown_q`.
enum L1dStatus l1d_estimate_unknown_q(const struct L1dConfig *cfg,
                                      const uint64_t *x,
                                      const uint64_t *y,
                                      size_t len,
                                      double rate_n,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* L1DIST_H */
