#ifndef PREFMETRIC_H
#define PREFMETRIC_H

/* Generated from the Rust sources by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Anything but `PM_OK` leaves a message for
 * `pm_last_error` on the calling thread.
 */
typedef enum PmStatus {
  PM_OK = 0,
  PM_ERR_IO = 1,
  PM_ERR_SCHEMA = 2,
  PM_ERR_NUMERIC = 3,
  PM_ERR_NULL = 4,
  PM_ERR_UTF8 = 5,
  PM_ERR_CONTRACT = 6,
} PmStatus;

/**
 * A loaded reward scorer and the feature extractor matching its
 * input dimension.
 */
typedef struct PmScorer PmScorer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *pm_version(void);

/**
 * Message from the most recent failed call on this thread; the empty
 * string when nothing has failed. The pointer stays valid until the
 * next failure on the same thread.
 */
const char *pm_last_error(void);

/**
 * Load scorer parameters from a JSON file and return a handle in
 * `*out`.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum PmStatus pm_scorer_load(const char *path, struct PmScorer **out);

/**
 * Build a scorer from parameter JSON held in memory.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum PmStatus pm_scorer_from_json(const char *json, struct PmScorer **out);

/**
 * Free a scorer returned by a constructor. Null is a no-op.
 *
 * # Safety
 * `scorer` must be null or a handle from a constructor, freed at most
 * once and not used afterwards.
 */
void pm_scorer_free(struct PmScorer *scorer);

/**
 * Report the scorer's feature and hidden dimensions.
 *
 * # Safety
 * All pointers must be valid; `scorer` must be a live handle.
 */
enum PmStatus pm_scorer_dims(const struct PmScorer *scorer, size_t *input_dim, size_t *hidden_dim);

/**
 * Score one candidate translation and write the raw reward to
 * `*out_reward`. `reference` may be null for reference-free scoring.
 *
 * # Safety
 * `scorer` must be a live handle, the strings nul-terminated, and
 * `out_reward` writable.
 */
enum PmStatus pm_score(const struct PmScorer *scorer,
                       const char *source,
                       const char *candidate,
                       const char *reference,
                       double *out_reward);

/**
 * Select the entropy-maximizing sigmoid temperature for a reward
 * sample, searching the built-in grid with the default bin count.
 * `out_entropy` may be null.
 *
 * # Safety
 * `rewards` must point to `len` doubles and `out_tau` be writable.
 */
enum PmStatus pm_select_temperature(const double *rewards,
                                    size_t len,
                                    double *out_tau,
                                    double *out_entropy);

/**
 * Calibrated score σ(reward / tau). Returns NaN (and records an
 * error) when tau is not a positive finite number.
 */
double pm_apply_sigmoid(double reward, double tau);

/**
 * Ranking loss −log σ(r_plus − r_minus − margin).
 */
double pm_bt_loss(double r_plus, double r_minus, double margin);

/**
 * Quadratic band penalty outside [beta_lower, beta_upper].
 */
double pm_reg_loss(double reward, double beta_upper, double beta_lower);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREFMETRIC_H */
