#ifndef EESHARE_H
#define EESHARE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which matrix of a solution to copy out.
 */
typedef enum EeMatrix {
  /**
   * Underlay: covariance of the non-decodable secondary stream.
   */
  EE_MATRIX_K21 = 0,
  /**
   * Underlay: covariance of the stream the primary receiver decodes.
   */
  EE_MATRIX_K22 = 1,
  /**
   * Overlay: relay matrix `A`.
   */
  EE_MATRIX_RELAY_A = 2,
  /**
   * Overlay: `X = A M A^H`.
   */
  EE_MATRIX_RELAY_X = 3,
  /**
   * Overlay: secondary data covariance `B`.
   */
  EE_MATRIX_DATA_B = 4,
} EeMatrix;

typedef enum EeObjective {
  EE_OBJECTIVE_ENERGY_EFFICIENCY = 0,
  EE_OBJECTIVE_RATE = 1,
} EeObjective;

typedef enum EeOverlayAlgorithm {
  EE_OVERLAY_ALGORITHM_FULL = 0,
  EE_OVERLAY_ALGORITHM_RANK1 = 1,
} EeOverlayAlgorithm;

typedef enum EeScenario {
  EE_SCENARIO_UNDERLAY = 0,
  EE_SCENARIO_OVERLAY = 1,
} EeScenario;

typedef enum EeStatus {
  EE_STATUS_OK = 0,
  EE_STATUS_NULL_POINTER = 1,
  EE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The rate targets cannot be met.
   */
  EE_STATUS_INFEASIBLE = 3,
  EE_STATUS_SOLVER_FAILURE = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  EE_STATUS_INTERNAL = 5,
} EeStatus;

/**
 * Opaque channel realization.
 */
typedef struct EeChannels EeChannels;

/**
 * Opaque allocation result.
 */
typedef struct EeSolution EeSolution;

/**
 * System parameters with scalar fields in SI units.
 */
typedef struct EeParams {
  size_t n_t1;
  size_t n_t2;
  size_t n_r;
  double p1_w;
  double p2_w;
  double noise_power_w;
  double bandwidth_hz;
  double alpha;
  double p_c_w;
  double r1_star_bps;
  double r2_star_bps;
} EeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static version string, e.g. `"0.1.0"`.
 */
const char *eeshare_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or 0
 * if there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t eeshare_last_error(char *buf, size_t len);

/**
 * Builds a channel set from caller arrays. Dimensions come from `params`:
 * `h11` has `n_t1` entries, `h22` is `n_r x n_t2`, `h12` is `n_r x n_t1`,
 * `h21` has `n_t2` entries and `ht` is `n_t2 x n_t1`. `ht` may be null for
 * underlay use, in which case it is set to zero.
 *
 * # Safety
 * Each non-null array must hold the stated number of complex entries.
 */
enum EeStatus eeshare_channels_new(const struct EeParams *params,
                                   const double *h11,
                                   const double *h22,
                                   const double *h12,
                                   const double *h21,
                                   const double *ht,
                                   struct EeChannels **out);

/**
 * Draws the channels of drop `index` from the seeded random geometry with
 * default cell layout.
 *
 * # Safety
 * `params` must be valid and `out` writable.
 */
enum EeStatus eeshare_channels_from_drop(const struct EeParams *params,
                                         enum EeScenario scenario,
                                         uint64_t seed,
                                         uint64_t index,
                                         struct EeChannels **out);

/**
 * # Safety
 * `ch` must be null or come from this library and not be freed twice.
 */
void eeshare_channels_free(struct EeChannels *ch);

/**
 * Primary point-to-point capacity in bit/s, or NaN on invalid input.
 *
 * # Safety
 * Pointers must be null or valid.
 */
double eeshare_direct_capacity(const struct EeParams *params, const struct EeChannels *ch);

/**
 * Runs the underlay allocator.
 *
 * # Safety
 * Pointers must be valid; `out` receives a solution to release with
 * [`eeshare_solution_free`].
 */
enum EeStatus eeshare_allocate_underlay(const struct EeParams *params,
                                        const struct EeChannels *ch,
                                        enum EeObjective obj,
                                        struct EeSolution **out);

/**
 * Runs an overlay allocator. `eps` is the relative stopping tolerance of the
 * outer loop; pass 0 for the default.
 *
 * # Safety
 * Pointers must be valid; `out` receives a solution to release with
 * [`eeshare_solution_free`].
 */
enum EeStatus eeshare_solve_overlay(const struct EeParams *params,
                                    const struct EeChannels *ch,
                                    enum EeOverlayAlgorithm algorithm,
                                    enum EeObjective obj,
                                    double eps,
                                    struct EeSolution **out);

/**
 * # Safety
 * `sol` must be null or come from this library and not be freed twice.
 */
void eeshare_solution_free(struct EeSolution *sol);

/**
 * Energy efficiency, bit/Joule (NaN for a null handle).
 *
 * # Safety
 * `sol` must be null or a live solution.
 */
double eeshare_solution_ee(const struct EeSolution *sol);

/**
 * Primary rate, bit/s.
 *
 * # Safety
 * `sol` must be null or a live solution.
 */
double eeshare_solution_r1(const struct EeSolution *sol);

/**
 * Secondary rate, bit/s.
 *
 * # Safety
 * `sol` must be null or a live solution.
 */
double eeshare_solution_r2(const struct EeSolution *sol);

/**
 * Consumed transmit power, W.
 *
 * # Safety
 * `sol` must be null or a live solution.
 */
double eeshare_solution_tx_power(const struct EeSolution *sol);

/**
 * Outer iterations used (0 for a null handle).
 *
 * # Safety
 * `sol` must be null or a live solution.
 */
size_t eeshare_solution_iterations(const struct EeSolution *sol);

/**
 * Underlay regime: 1, 2 or 3. Overlay solutions and null handles give 0.
 *
 * # Safety
 * `sol` must be null or a live solution.
 */
uint32_t eeshare_solution_case(const struct EeSolution *sol);

/**
 * Copies one matrix of the solution into `buf` as interleaved row-major
 * complex values and stores its dimensions in `rows`/`cols`. Call with a
 * null `buf` to query the size; `len` counts doubles.
 *
 * # Safety
 * `rows` and `cols` must be writable; `buf` null or `len` writable doubles.
 */
enum EeStatus eeshare_solution_matrix(const struct EeSolution *sol,
                                      enum EeMatrix which,
                                      double *buf,
                                      size_t len,
                                      size_t *rows,
                                      size_t *cols);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EESHARE_H */
