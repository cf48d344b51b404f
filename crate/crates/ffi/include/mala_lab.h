#ifndef MALA_LAB_H
#define MALA_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MALA_KERNEL_MALA 0

#define MALA_KERNEL_ULA 1

#define MALA_KERNEL_OU_EXACT 2

/**
 * Result code of every fallible call.
 */
typedef enum MalaStatus {
  MALA_STATUS_OK = 0,
  MALA_STATUS_NULL_POINTER = 1,
  MALA_STATUS_INVALID_INPUT = 2,
  MALA_STATUS_NUMERIC = 3,
  MALA_STATUS_UNSUPPORTED = 4,
  MALA_STATUS_ACCURACY = 5,
  MALA_STATUS_RESOURCE = 6,
  MALA_STATUS_CONFIG = 7,
  MALA_STATUS_IO = 8,
  MALA_STATUS_INTERNAL = 9,
  MALA_STATUS_PANIC = 10,
} MalaStatus;

/**
 * Opaque chain: a potential, kernel parameters and the current state.
 */
typedef struct MalaChain MalaChain;

/**
 * Opaque target potential.
 */
typedef struct MalaPotential MalaPotential;

/**
 * Outcome of [`mala_run_chain`]. Fields are NaN when undefined (an empty
 * run, or too few steps for batch means).
 */
typedef struct MalaChainSummary {
  uint64_t n_steps;
  double acceptance_rate;
  double mean_accept_prob;
  double coord1_second_moment;
  double coord1_second_moment_se;
} MalaChainSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mala_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mala_version(void);

/**
 * Standard Gaussian target in `d` dimensions.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum MalaStatus mala_potential_new_gaussian(size_t d, struct MalaPotential **out);

/**
 * Cosine-perturbed Gaussian with ripple exponent `eta` in (0, 1/4).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum MalaStatus mala_potential_new_adversarial(size_t d, double eta, struct MalaPotential **out);

/**
 * Potential from a `key=value` spec such as `"kind=adversarial;d=64;eta=0.2"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` as for the other constructors.
 */
enum MalaStatus mala_potential_parse(const char *spec, struct MalaPotential **out);

/**
 * # Safety
 * `p` must come from a `mala_potential_*` constructor and not be used again.
 */
void mala_potential_free(struct MalaPotential *p);

/**
 * Dimension of `p`, or 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live potential.
 */
size_t mala_potential_dim(const struct MalaPotential *p);

/**
 * `V(x)` and `∇V(x)`. `grad_out` may be NULL.
 *
 * # Safety
 * `x` must point to `len` doubles, `grad_out` (if not NULL) to `len`
 * writable doubles, `value_out` to one writable double.
 */
enum MalaStatus mala_potential_evaluate(const struct MalaPotential *p,
                                        const double *x,
                                        size_t len,
                                        double *value_out,
                                        double *grad_out);

/**
 * `ln a(x, y)` for the MALA proposal with step `h`.
 *
 * # Safety
 * `x`, `y` must point to `len` doubles; `out` to one writable double.
 */
enum MalaStatus mala_log_accept_ratio(const struct MalaPotential *p,
                                      double h,
                                      const double *x,
                                      const double *y,
                                      size_t len,
                                      double *out);

/**
 * New chain at `x0`. The chain keeps its own copy of the potential.
 *
 * # Safety
 * `x0` must point to `len` doubles; `out` to storage for one pointer.
 */
enum MalaStatus mala_chain_new(const struct MalaPotential *p,
                               uint32_t kernel,
                               double h,
                               const double *x0,
                               size_t len,
                               uint64_t seed,
                               struct MalaChain **out);

/**
 * Advance one transition. `accepted_out` (may be NULL) receives 1 if the
 * proposal was accepted, 0 otherwise.
 *
 * # Safety
 * `chain` must be a live chain; `accepted_out` NULL or writable.
 */
enum MalaStatus mala_chain_step(struct MalaChain *chain, int32_t *accepted_out);

/**
 * Copy the current state into `x_out`.
 *
 * # Safety
 * `x_out` must point to `len` writable doubles.
 */
enum MalaStatus mala_chain_state(const struct MalaChain *chain, double *x_out, size_t len);

/**
 * # Safety
 * `chain` must come from [`mala_chain_new`] and not be used again.
 */
void mala_chain_free(struct MalaChain *chain);

/**
 * Run `n_steps` transitions from `x0` and summarise them.
 *
 * # Safety
 * `x0` must point to `len` doubles; `out` to one writable summary.
 */
enum MalaStatus mala_run_chain(const struct MalaPotential *p,
                               uint32_t kernel,
                               double h,
                               const double *x0,
                               size_t len,
                               uint64_t n_steps,
                               uint64_t seed,
                               struct MalaChainSummary *out);

/**
 * Mean acceptance over exact stationary draws (separable targets only).
 * `filter` nonzero applies the typical-set filter.
 *
 * # Safety
 * `value_out` and `se_out` must point to writable doubles.
 */
enum MalaStatus mala_mean_acceptance(const struct MalaPotential *p,
                                     double h,
                                     size_t n_states,
                                     size_t n_mc,
                                     int32_t filter,
                                     uint64_t seed,
                                     double *value_out,
                                     double *se_out);

/**
 * Spectral gap and conductance of the Metropolis chain built from the
 * row-major `n×n` proposal `q` and stationary vector `pi`.
 *
 * # Safety
 * `pi` must point to `n` doubles, `q` to `n*n` doubles, outputs to
 * writable doubles (`conductance_out` may be NULL).
 */
enum MalaStatus mala_finite_spectral_gap(size_t n,
                                         const double *pi,
                                         const double *q,
                                         double *gap_out,
                                         double *conductance_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MALA_LAB_H */
