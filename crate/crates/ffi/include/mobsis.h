#ifndef MOBSIS_H
#define MOBSIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MobsisGraphKind {
  MOBSIS_GRAPH_KIND_LINE = 0,
  MOBSIS_GRAPH_KIND_RING = 1,
  // Node 0 is the hub.
  MOBSIS_GRAPH_KIND_STAR = 2,
  MOBSIS_GRAPH_KIND_COMPLETE = 3,
} MobsisGraphKind;

// Result of every fallible call.
typedef enum MobsisStatus {
  MOBSIS_STATUS_OK = 0,
  MOBSIS_STATUS_NULL_POINTER = 1,
  // Malformed input: bad sign pattern, wrong length, out-of-range value.
  MOBSIS_STATUS_INVALID_ARGUMENT = 2,
  // The mobility chain is not irreducible.
  MOBSIS_STATUS_NOT_IRREDUCIBLE = 3,
  // An iteration failed to converge or a state left its invariant box.
  MOBSIS_STATUS_NUMERICAL_FAILURE = 4,
  // An endemic equilibrium was requested in the disease-free regime.
  MOBSIS_STATUS_NOT_ENDEMIC = 5,
  // An output buffer length does not match the model size.
  MOBSIS_STATUS_BUFFER_SIZE = 6,
  // A Rust panic was caught at the boundary.
  MOBSIS_STATUS_PANIC = 7,
} MobsisStatus;

typedef enum MobsisVerdict {
  MOBSIS_VERDICT_DISEASE_FREE_STABLE = 0,
  MOBSIS_VERDICT_ENDEMIC_STABLE = 1,
} MobsisVerdict;

// Validated mobility generator.
typedef struct MobsisGenerator MobsisGenerator;

// Per-node infection and curing rates.
typedef struct MobsisParams MobsisParams;

// Sampled deterministic trajectory.
typedef struct MobsisTrajectory MobsisTrajectory;

// Stability report. `r0` is NaN when every curing rate is zero.
typedef struct MobsisReport {
  size_t n;
  double mu;
  double r0;
  double lambda2;
  double m;
  double m_lower;
  bool condition_i;
  bool condition_ii;
  bool condition_iii;
  bool condition_iv;
  double condition_iv_margin;
  enum MobsisVerdict verdict;
} MobsisReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread; empty after a success.
// Valid until the next mobsis call on the same thread.
const char *mobsis_last_error(void);

// Validates the row-major `n x n` rate matrix `q`. The diagonal is
// recomputed from the off-diagonal rates.
//
// # Safety
// `q` must point to `n * n` doubles and `out` to writable storage.
enum MobsisStatus mobsis_generator_from_matrix(const double *q,
                                               size_t n,
                                               struct MobsisGenerator **out);

// `q_ij = nu_i / outdegree(i)` on the named topology.
//
// # Safety
// `nu` must point to `n` doubles and `out` to writable storage.
enum MobsisStatus mobsis_generator_uniform(enum MobsisGraphKind kind,
                                           size_t n,
                                           const double *nu,
                                           struct MobsisGenerator **out);

// Metropolis-Hastings rates on the named topology with stationary
// distribution `target` (normalised internally).
//
// # Safety
// `target` must point to `n` doubles and `out` to writable storage.
enum MobsisStatus mobsis_generator_metropolis_hastings(enum MobsisGraphKind kind,
                                                       size_t n,
                                                       const double *target,
                                                       double base_rate,
                                                       struct MobsisGenerator **out);

// Number of regions, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live handle.
size_t mobsis_generator_n(const struct MobsisGenerator *g);

// # Safety
// `g` must be null or a handle not yet freed.
void mobsis_generator_free(struct MobsisGenerator *g);

// Stationary distribution `v` into `out` (length `n`).
//
// # Safety
// `g` must be a live handle and `out` must point to `len` doubles.
enum MobsisStatus mobsis_stationary_distribution(const struct MobsisGenerator *g,
                                                 double *out,
                                                 size_t len);

// # Safety
// `beta` and `delta` must point to `n` doubles and `out` to writable storage.
enum MobsisStatus mobsis_params_new(const double *beta,
                                    const double *delta,
                                    size_t n,
                                    struct MobsisParams **out);

// # Safety
// `params` must be null or a handle not yet freed.
void mobsis_params_free(struct MobsisParams *params);

// Full stability report.
//
// # Safety
// `g` and `params` must be live handles and `out` writable.
enum MobsisStatus mobsis_classify(const struct MobsisGenerator *g,
                                  const struct MobsisParams *params,
                                  struct MobsisReport *out);

// Endemic equilibrium `p*` into `out`; [`MobsisStatus::NotEndemic`] in the
// disease-free regime.
//
// # Safety
// `g` and `params` must be live handles and `out` must point to `len` doubles.
enum MobsisStatus mobsis_endemic_fixed_point(const struct MobsisGenerator *g,
                                             const struct MobsisParams *params,
                                             double tol,
                                             double *out,
                                             size_t len);

// Curing rates meeting the `lambda2` condition with equality for
// `m = m_factor * m_lower`. Nodes listed in `pinned` (0-based) sit at
// `beta + m`.
//
// # Safety
// `g` must be a live handle, `beta` and `out` must point to `n` doubles and
// `pinned` to `pinned_len` indices (it may be null when `pinned_len` is 0).
enum MobsisStatus mobsis_lambda2_curing_rates(const struct MobsisGenerator *g,
                                              const double *beta,
                                              double m_factor,
                                              const size_t *pinned,
                                              size_t pinned_len,
                                              double *out,
                                              size_t len);

// RK4 integration from `(p0, x0)`; `x0` may be null to start from the
// stationary distribution. Every `output_stride`-th step is kept, plus the
// final state at exactly `t_end`.
//
// # Safety
// `g` and `params` must be live handles, `p0` must point to `n` doubles,
// `x0` to `n` doubles or be null, and `out` must be writable.
enum MobsisStatus mobsis_integrate(const struct MobsisGenerator *g,
                                   const struct MobsisParams *params,
                                   const double *p0,
                                   const double *x0,
                                   size_t n,
                                   double t_end,
                                   double dt,
                                   size_t output_stride,
                                   struct MobsisTrajectory **out);

// Number of stored samples, or 0 for a null handle.
//
// # Safety
// `trajectory` must be null or a live handle.
size_t mobsis_trajectory_len(const struct MobsisTrajectory *trajectory);

// Time and state of sample `index`. `p` and `x` must each hold `n` doubles;
// either may be null to skip it.
//
// # Safety
// `trajectory` must be a live handle and `t` writable; non-null `p`/`x`
// must point to `n` doubles.
enum MobsisStatus mobsis_trajectory_sample(const struct MobsisTrajectory *trajectory,
                                           size_t index,
                                           double *t,
                                           double *p,
                                           double *x,
                                           size_t n);

// # Safety
// `trajectory` must be null or a handle not yet freed.
void mobsis_trajectory_free(struct MobsisTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOBSIS_H */
