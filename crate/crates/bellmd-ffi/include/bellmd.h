/* C interface for the bellmd library.
 *
 * Conventions:
 *   - Every function returns a bellmd_status; results come back through
 *     out pointers, which are written only on BELLMD_OK.
 *   - Opaque handles are created by *_new functions and must be released
 *     with the matching *_free; freeing NULL is a no-op.
 *   - On failure, bellmd_last_error_message() returns a human-readable
 *     description for the calling thread.
 *
 * Keep in sync with src/lib.rs (enforced by the crate's header_sync test).
 */

#ifndef BELLMD_H
#define BELLMD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bellmd_status {
  BELLMD_OK = 0,
  BELLMD_ERR_NULL_POINTER = 1,
  BELLMD_ERR_INVALID_ARGUMENT = 2,
  BELLMD_ERR_DOMAIN = 3,
  BELLMD_ERR_SIZE_LIMIT = 4,
  BELLMD_ERR_SOLVER = 5,
  BELLMD_ERR_INTERNAL = 6,
} bellmd_status;

/* Game selectors. */
#define BELLMD_GAME_CHSH 0u
#define BELLMD_GAME_I3322 1u

/* Opaque handles. */
typedef struct BellmdCurve bellmd_curve;
typedef struct BellmdProfile bellmd_profile;

/* Monte-Carlo verification summary. */
typedef struct bellmd_sim_summary {
  uint64_t trials;
  uint64_t seed;
  double empirical_s;
  double std_error;
  double analytic_s;
  double worst_marginal_deviation;
  double worst_outcome_bias;
  uint8_t all_checks_passed; /* 1 when every 4-sigma check passed */
} bellmd_sim_summary;

/* Copy the calling thread's last error message into buffer (truncating,
 * always NUL-terminated when capacity > 0) and return the full message
 * length in bytes. Pass NULL/0 to query the length. */
size_t bellmd_last_error_message(char *buffer, size_t capacity);

/* Optimal single-run score at per-run level p: 24p - 4, saturating at 4.
 * Domain: 1/4 <= p <= 1. */
bellmd_status bellmd_single_shot_score(double p, double *out);

/* Optimal n-run correlated score at per-run level p.
 * Domain: 1 <= n <= 10000, 1/4 <= p <= 1/3. */
bellmd_status bellmd_max_score(uint32_t n, double p, double *out);

/* Minimal per-run level able to fake score s with unbounded correlation.
 * Domain: 2 <= s <= 4. Exact 1/4 at s = 2 and 1/3 at s = 4. */
bellmd_status bellmd_asymptotic_bound_p(double s, double *out);

/* Inverse of the bound: the infinite-run score ceiling at level p. */
bellmd_status bellmd_asymptotic_score(double p, double *out);

/* Quantum ceiling paired with a classical optimum s_c (identity above
 * 16/5). Domain: 2 <= s_c <= 4. */
bellmd_status bellmd_sq_from_sc(double s_c, double *out);

/* L1 budget at which the game's score saturates for n runs. */
bellmd_status bellmd_m1_max(uint32_t game, uint32_t n, double *out);

/* Optimal correlated score for the game over n runs at L1 budget m1. */
bellmd_status bellmd_solve_m1(uint32_t game, uint32_t n, double m1,
                              double *out);

/* Vertices of the optimal n-run attack curve. */
bellmd_status bellmd_curve_new(uint32_t n, bellmd_curve **out);
bellmd_status bellmd_curve_len(const bellmd_curve *curve, size_t *out);
/* Vertex index in [0, len): per-run level, score and threshold class.
 * out_lprime is SIZE_MAX for interpolated (non-vertex) points. */
bellmd_status bellmd_curve_point(const bellmd_curve *curve, size_t index,
                                 double *out_p, double *out_s,
                                 size_t *out_lprime);
void bellmd_curve_free(bellmd_curve *curve);

/* Optimal n-run CHSH strategy profile at per-run level p. */
bellmd_status bellmd_profile_new(uint32_t n, double p, bellmd_profile **out);
bellmd_status bellmd_profile_score(const bellmd_profile *profile, double *out);
/* use_l1 = 0: per-run max-prob level; use_l1 = 1: block L1 value. */
bellmd_status bellmd_profile_md(const bellmd_profile *profile, uint8_t use_l1,
                                double *out);
/* Member mass of the class with k correct runs. */
bellmd_status bellmd_profile_mass(const bellmd_profile *profile, size_t k,
                                  double *out);
/* Serialize as JSON into buffer (truncating, NUL-terminated when
 * capacity > 0); returns the full length in bytes. */
size_t bellmd_profile_to_json(const bellmd_profile *profile, char *buffer,
                              size_t capacity);
void bellmd_profile_free(bellmd_profile *profile);

/* Monte-Carlo verification of the optimal n-run profile at level p. */
bellmd_status bellmd_simulate_chsh(uint32_t n, double p, uint64_t trials,
                                   uint64_t seed, bellmd_sim_summary *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BELLMD_H */
