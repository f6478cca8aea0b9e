#ifndef LBPS_CTMC_H
#define LBPS_CTMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LbpsStatus {
  LBPS_STATUS_OK = 0,
  LBPS_STATUS_NULL_POINTER = 1,
  LBPS_STATUS_INVALID_ARGUMENT = 2,
  LBPS_STATUS_PRECONDITION = 3,
  LBPS_STATUS_NUMERICAL = 4,
  LBPS_STATUS_IO = 5,
  LBPS_STATUS_PARSE = 6,
  LBPS_STATUS_INTERNAL = 7,
  LBPS_STATUS_PANIC = 8,
} LbpsStatus;

typedef enum LbpsFeatures {
  LBPS_FEATURES_GTR = 0,
  LBPS_FEATURES_CHAIN = 1,
} LbpsFeatures;

typedef enum LbpsKernel {
  LBPS_KERNEL_LBPS_HMC = 0,
  LBPS_KERNEL_HMC_ONLY = 1,
} LbpsKernel;

/**
 * Opaque output of one chain.
 */
typedef struct LbpsChain LbpsChain;

/**
 * Opaque set of observed series with its state space.
 */
typedef struct LbpsDataset LbpsDataset;

/**
 * Opaque rate matrix.
 */
typedef struct LbpsRateMatrix LbpsRateMatrix;

/**
 * Sampler settings for [`lbps_run_chain`]. Fill with
 * [`lbps_run_options_default`] before changing fields.
 */
typedef struct LbpsRunOptions {
  enum LbpsKernel kernel;
  enum LbpsFeatures features;
  size_t iterations;
  double trajectory_length;
  double refresh_rate;
  size_t hmc_steps;
  double step_size;
  double kappa;
  double burn_in;
  size_t thin;
  uint64_t seed;
} LbpsRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lbps_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *lbps_version(void);

/**
 * Builds the rate matrix of weights `(wu, wb)` under GTR or chain features
 * with the lexicographic pair order. `wu` has `n_states` entries and `wb`
 * has `n_states (n_states - 1) / 2`.
 */
enum LbpsStatus lbps_rate_matrix_new(size_t n_states,
                                     enum LbpsFeatures features,
                                     const double *wu,
                                     size_t wu_len,
                                     const double *wb,
                                     size_t wb_len,
                                     struct LbpsRateMatrix **out);

void lbps_rate_matrix_free(struct LbpsRateMatrix *m);

/**
 * Number of states, or 0 for a null handle.
 */
size_t lbps_rate_matrix_n_states(const struct LbpsRateMatrix *m);

/**
 * Generator in row-major order; `len` must be `n_states^2`.
 */
enum LbpsStatus lbps_rate_matrix_q(const struct LbpsRateMatrix *m, double *out, size_t len);

/**
 * Stationary distribution; `len` must be `n_states`.
 */
enum LbpsStatus lbps_rate_matrix_pi(const struct LbpsRateMatrix *m, double *out, size_t len);

/**
 * `exp(Q t)` in row-major order; `len` must be `n_states^2`.
 */
enum LbpsStatus lbps_rate_matrix_transition(const struct LbpsRateMatrix *m,
                                            double t,
                                            double *out,
                                            size_t len);

/**
 * Time to a bounce of a sojourn factor `h q0 exp(<w, phi>)` moving with
 * directional derivative `dot`, for energy gap `c`. Infinite if it never bounces.
 */
enum LbpsStatus lbps_bounce_time_sojourn(double h, double q0, double dot, double c, double *out);

/**
 * Time to a bounce of a transition-count factor.
 */
enum LbpsStatus lbps_bounce_time_transition(double count, double dot, double c, double *out);

/**
 * Time to a bounce under intensity `max(0, a + b t)`.
 */
enum LbpsStatus lbps_bounce_time_normal(double a, double b, double c, double *out);

/**
 * Reflects `v` off the hyperplane orthogonal to `grad`.
 */
enum LbpsStatus lbps_reflect(const double *v, const double *grad, size_t n, double *out);

/**
 * Batch-means effective sample size. `degenerate` (may be null) is set to 1
 * for a constant sequence.
 */
enum LbpsStatus lbps_ess_batch_means(const double *x, size_t n, double *ess, int32_t *degenerate);

/**
 * Absolute relative difference `|x - y| / max(x, y)`.
 */
enum LbpsStatus lbps_ard(double x, double y, double *out);

/**
 * Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
 */
enum LbpsStatus lbps_ks_two_sample(const double *a,
                                   size_t na,
                                   const double *b,
                                   size_t nb,
                                   double *statistic,
                                   double *p_value);

/**
 * Grantham distance between two one-letter amino-acid codes.
 */
enum LbpsStatus lbps_grantham(char a, char b, uint16_t *out);

/**
 * The 20 one-letter codes in table order, as a static string.
 */
const char *lbps_amino_alphabet(void);

/**
 * Nearest-neighbour pair ranking over the Grantham table. Writes the two
 * members of the pair at each rank as one-letter codes; `len` must be 190.
 */
enum LbpsStatus lbps_nnpaao_ordering(char *first, char *second, size_t len);

/**
 * Reads a `series_id,time,state` CSV file. `alphabet` is `dna`, `aa`, or a
 * number of states.
 */
enum LbpsStatus lbps_dataset_read_csv(const char *path,
                                      const char *alphabet,
                                      struct LbpsDataset **out);

void lbps_dataset_free(struct LbpsDataset *d);

/**
 * Number of series, or 0 for a null handle.
 */
size_t lbps_dataset_len(const struct LbpsDataset *d);

/**
 * Number of states, or 0 for a null handle.
 */
size_t lbps_dataset_n_states(const struct LbpsDataset *d);

enum LbpsStatus lbps_run_options_default(struct LbpsRunOptions *out);

/**
 * Runs one chain on `data`.
 */
enum LbpsStatus lbps_run_chain(const struct LbpsDataset *data,
                               const struct LbpsRunOptions *options,
                               struct LbpsChain **out);

void lbps_chain_free(struct LbpsChain *c);

/**
 * Number of retained samples, or 0 for a null handle.
 */
size_t lbps_chain_num_samples(const struct LbpsChain *c);

/**
 * Length of one weight sample (`wu` then `wb`), or 0 for a null handle.
 */
size_t lbps_chain_dim(const struct LbpsChain *c);

/**
 * Number of exchangeable parameters, or 0 for a null handle.
 */
size_t lbps_chain_num_theta(const struct LbpsChain *c);

/**
 * All retained weight samples, row-major; `len` must be samples x dim.
 */
enum LbpsStatus lbps_chain_samples(const struct LbpsChain *c, double *out, size_t len);

/**
 * Post-burn-in means of the exchangeable parameters; `len` must be
 * [`lbps_chain_num_theta`].
 */
enum LbpsStatus lbps_chain_theta_means(const struct LbpsChain *c, double *out, size_t len);

/**
 * Total wall-clock seconds the chain spent, or 0 for a null handle.
 */
double lbps_chain_seconds(const struct LbpsChain *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LBPS_CTMC_H */
