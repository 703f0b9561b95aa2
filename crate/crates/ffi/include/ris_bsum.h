#ifndef RIS_BSUM_H
#define RIS_BSUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RisStatus {
  RIS_STATUS_OK = 0,
  RIS_STATUS_NULL_POINTER = 1,
  RIS_STATUS_INVALID_INPUT = 2,
  RIS_STATUS_DIMENSION_MISMATCH = 3,
  RIS_STATUS_NOT_POSITIVE_DEFINITE = 4,
  RIS_STATUS_NON_FINITE = 5,
  RIS_STATUS_BUFFER_TOO_SMALL = 6,
  RIS_STATUS_PANIC = 7,
} RisStatus;

/**
 * Opaque channel realization.
 */
typedef struct RisChannels RisChannels;

/**
 * Opaque solver result.
 */
typedef struct RisSolution RisSolution;

/**
 * Solver knobs; obtain defaults from [`ris_solver_options_default`].
 */
typedef struct RisSolverOptions {
  /**
   * Stop once the sum-rate change drops below this.
   */
  double tol;
  uint32_t max_iters;
  /**
   * Penalty growth factor per iteration, at least 1.
   */
  double mu_growth;
  /**
   * Seed of the random initial reflection phases.
   */
  uint64_t init_seed;
} RisSolverOptions;

typedef struct RisComplex {
  double re;
  double im;
} RisComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ris_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *ris_version(void);

double ris_dbm_to_watts(double dbm);

struct RisSolverOptions ris_solver_options_default(void);

/**
 * Draws a seeded channel realization with the default geometry (BS at the
 * origin, RIS 100 m away, users on an 8 m disk around the RIS) and
 * Rician factor `rician_factor`. Noise powers are in dBm.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RisStatus ris_channels_generate(size_t m,
                                     size_t n,
                                     size_t k,
                                     uint64_t seed,
                                     double rician_factor,
                                     double noise_user_dbm,
                                     double noise_ris_dbm,
                                     struct RisChannels **out);

/**
 * Builds channels from caller data: `bs_user` is M×K, `ris_user` N×K,
 * `bs_ris` N×M (all column-major), `noise_user` has K entries. Powers in
 * watts.
 *
 * # Safety
 * Each array must hold the stated number of elements; `out` must be
 * writable.
 */
enum RisStatus ris_channels_from_arrays(size_t m,
                                        size_t n,
                                        size_t k,
                                        const struct RisComplex *bs_user,
                                        const struct RisComplex *ris_user,
                                        const struct RisComplex *bs_ris,
                                        double noise_ris,
                                        const double *noise_user,
                                        struct RisChannels **out);

/**
 * # Safety
 * `ch` must be null or a handle from this library not yet freed.
 */
void ris_channels_free(struct RisChannels *ch);

/**
 * # Safety
 * `ch` must be a live handle; the size pointers may be null.
 */
enum RisStatus ris_channels_dims(const struct RisChannels *ch, size_t *m, size_t *n, size_t *k);

/**
 * Sum rate in bits/s/Hz of precoder `w` (M×K, column-major) and reflection
 * coefficients `phi` (N entries).
 *
 * # Safety
 * `ch` must be live and the arrays sized to its dimensions.
 */
enum RisStatus ris_sum_rate(const struct RisChannels *ch,
                            const struct RisComplex *w,
                            const struct RisComplex *phi,
                            double *out);

/**
 * Runs the solver. `p_bs`/`p_ris` are in watts, `eta` has one amplitude cap
 * per RIS element, `per_antenna` switches the BS constraint to per-antenna
 * power `p_bs / M`. `options` may be null for defaults.
 *
 * # Safety
 * `ch` must be live, `eta` must hold N values, `out` must be writable.
 */
enum RisStatus ris_solve(const struct RisChannels *ch,
                         double p_bs,
                         double p_ris,
                         const double *eta,
                         bool per_antenna,
                         const struct RisSolverOptions *options,
                         struct RisSolution **out);

/**
 * # Safety
 * `sol` must be null or a handle from this library not yet freed.
 */
void ris_solution_free(struct RisSolution *sol);

/**
 * Sum rate of the feasible solution, or NaN for a null handle.
 *
 * # Safety
 * `sol` must be null or live.
 */
double ris_solution_sum_rate(const struct RisSolution *sol);

/**
 * Sum rate at the solver's starting point, or NaN for a null handle.
 *
 * # Safety
 * `sol` must be null or live.
 */
double ris_solution_initial_sum_rate(const struct RisSolution *sol);

/**
 * # Safety
 * `sol` must be null or live.
 */
size_t ris_solution_iterations(const struct RisSolution *sol);

/**
 * # Safety
 * `sol` must be null or live.
 */
bool ris_solution_converged(const struct RisSolution *sol);

/**
 * Largest relative constraint violation of the returned point.
 *
 * # Safety
 * `sol` must be null or live.
 */
double ris_solution_max_residual(const struct RisSolution *sol);

/**
 * Copies the M×K precoder, column-major, into `out` (capacity `len`).
 *
 * # Safety
 * `sol` must be live and `out` must hold `len` values.
 */
enum RisStatus ris_solution_precoder(const struct RisSolution *sol,
                                     struct RisComplex *out,
                                     size_t len);

/**
 * Copies the N reflection coefficients into `out` (capacity `len`).
 *
 * # Safety
 * `sol` must be live and `out` must hold `len` values.
 */
enum RisStatus ris_solution_reflect(const struct RisSolution *sol,
                                    struct RisComplex *out,
                                    size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_BSUM_H */
