#ifndef PSSE_H
#define PSSE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum PsseStatus {
  PSSE_STATUS_OK = 0,
  PSSE_STATUS_NULL_POINTER = 1,
  PSSE_STATUS_INVALID_UTF8 = 2,
  PSSE_STATUS_PARSE = 3,
  PSSE_STATUS_INVALID_ARGUMENT = 4,
  PSSE_STATUS_NUMERICAL = 5,
  PSSE_STATUS_UNOBSERVABLE = 6,
  PSSE_STATUS_IO = 7,
  PSSE_STATUS_PANIC = 8,
} PsseStatus;

/**
 * Measurement kind codes, in the canonical order. Arrays of kinds cross the
 * boundary as `uint32_t` and are range-checked.
 */
typedef enum PsseKind {
  PSSE_KIND_VSQ = 0,
  PSSE_KIND_PF = 1,
  PSSE_KIND_QF = 2,
  PSSE_KIND_PINJ = 3,
  PSSE_KIND_QINJ = 4,
  PSSE_KIND_PT = 5,
  PSSE_KIND_QT = 6,
} PsseKind;

/**
 * A parsed network with its admittance matrices.
 */
typedef struct PsseCase PsseCase;

/**
 * A measurement set tied to the case it was built from.
 */
typedef struct PsseMeasurementSet PsseMeasurementSet;

/**
 * Parameters of the deterministic prox-linear solver.
 */
typedef struct PsseDeterministicParams {
  double mu;
  double rho;
  size_t inner_iters;
  size_t max_outer;
  double tol;
  /**
   * Soft-threshold weight; the library default is 0.5.
   */
  double l1_weight;
} PsseDeterministicParams;

/**
 * Parameters of the stochastic prox-linear solver.
 */
typedef struct PsseStochasticParams {
  double alpha;
  double beta;
  /**
   * Used instead of `alpha·t^(-beta)` when positive.
   */
  double constant_step;
  size_t max_epochs;
  double tol;
  uint64_t seed;
  /**
   * 0 = uniform, 1 = per-epoch permutation, 2 = index order.
   */
  uint32_t sampling;
  /**
   * Nonzero to use disjoint-support mini-batches.
   */
  uint32_t minibatch;
} PsseStochasticParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *psse_last_error_message(void);

/**
 * Parses a MATPOWER or JSON case from a NUL-terminated string.
 *
 * # Safety
 * `text` must be a valid C string and `out` a writable pointer.
 */
enum PsseStatus psse_case_parse(const char *text, struct PsseCase **out);

/**
 * Loads a case file from disk.
 *
 * # Safety
 * `path` must be a valid C string and `out` a writable pointer.
 */
enum PsseStatus psse_case_load(const char *path, struct PsseCase **out);

/**
 * Releases a case. Null is ignored.
 *
 * # Safety
 * `case` must come from `psse_case_parse`/`psse_case_load` and not be used again.
 */
void psse_case_free(struct PsseCase *case_);

/**
 * Number of buses `N`, or 0 for a null handle.
 *
 * # Safety
 * `case` must be null or a live handle.
 */
size_t psse_case_bus_count(const struct PsseCase *case_);

/**
 * Number of in-service branches `L`, or 0 for a null handle.
 *
 * # Safety
 * `case` must be null or a live handle.
 */
size_t psse_case_branch_count(const struct PsseCase *case_);

/**
 * Zero-based position of the reference bus.
 *
 * # Safety
 * `case` must be null or a live handle.
 */
size_t psse_case_reference_bus(const struct PsseCase *case_);

/**
 * Writes the voltage profile stored in the case into two length-`N` arrays.
 *
 * # Safety
 * `re` and `im` must each hold `psse_case_bus_count(case)` doubles.
 */
enum PsseStatus psse_case_voltages(const struct PsseCase *case_, double *re, double *im);

/**
 * Simulates every location of the given kinds at state `v` with Gaussian
 * noise of the given per-class standard deviations.
 *
 * # Safety
 * `kinds` must hold `kind_count` [`PsseKind`] codes; `v_re`/`v_im` must hold
 * `n` doubles.
 */
enum PsseStatus psse_measurements_simulate(const struct PsseCase *case_,
                                           const uint32_t *kinds,
                                           size_t kind_count,
                                           const double *v_re,
                                           const double *v_im,
                                           size_t n,
                                           double sigma_vsq,
                                           double sigma_flow,
                                           double sigma_injection,
                                           uint64_t seed,
                                           struct PsseMeasurementSet **out);

/**
 * Replaces `floor(fraction·M)` flow/injection values by Laplacian outliers.
 *
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
enum PsseStatus psse_measurements_corrupt_laplacian(const struct PsseMeasurementSet *set,
                                                    double fraction,
                                                    double mean,
                                                    double stddev,
                                                    uint64_t seed,
                                                    struct PsseMeasurementSet **out);

/**
 * Divides every record by the spectral norm of its matrix.
 *
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
enum PsseStatus psse_measurements_normalize(const struct PsseMeasurementSet *set,
                                            struct PsseMeasurementSet **out);

/**
 * Rebuilds a set from its JSON form against `case`.
 *
 * # Safety
 * `json` must be a valid C string; `case` live; `out` writable.
 */
enum PsseStatus psse_measurements_from_json(const struct PsseCase *case_,
                                            const char *json,
                                            struct PsseMeasurementSet **out);

/**
 * Serializes a set to JSON. Release the string with `psse_string_free`.
 *
 * # Safety
 * `set` must be live and `out` writable.
 */
enum PsseStatus psse_measurements_to_json(const struct PsseMeasurementSet *set, char **out);

/**
 * Number of records `M`, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t psse_measurements_count(const struct PsseMeasurementSet *set);

/**
 * Number of records flagged as corrupted.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t psse_measurements_corrupted_count(const struct PsseMeasurementSet *set);

/**
 * Releases a set. Null is ignored.
 *
 * # Safety
 * `set` must come from this library and not be used again.
 */
void psse_measurements_free(struct PsseMeasurementSet *set);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used again.
 */
void psse_string_free(char *s);

/**
 * Mean absolute residual of `set` at `v`.
 *
 * # Safety
 * `v_re`/`v_im` must hold `n` doubles and `out` be writable.
 */
enum PsseStatus psse_lav_objective(const struct PsseMeasurementSet *set,
                                   const double *v_re,
                                   const double *v_im,
                                   size_t n,
                                   double *out);

/**
 * Normalized RMSE after aligning both vectors to zero phase at `reference`.
 *
 * # Safety
 * All four arrays must hold `n` doubles and `out` be writable.
 */
enum PsseStatus psse_rmse(const double *est_re,
                          const double *est_im,
                          const double *truth_re,
                          const double *truth_im,
                          size_t n,
                          size_t reference,
                          double *out);

/**
 * Deterministic prox-linear solve from `v0`; writes the estimate into
 * `out_re`/`out_im` and, if non-null, the outer iteration count.
 *
 * # Safety
 * Vector arguments must hold `n` doubles; `params` must be readable.
 */
enum PsseStatus psse_solve_deterministic(const struct PsseMeasurementSet *set,
                                         const struct PsseDeterministicParams *params,
                                         const double *v0_re,
                                         const double *v0_im,
                                         size_t n,
                                         double *out_re,
                                         double *out_im,
                                         size_t *out_iterations);

/**
 * Stochastic prox-linear solve from `v0`; the iteration count is in epochs.
 *
 * # Safety
 * Vector arguments must hold `n` doubles; `params` must be readable.
 */
enum PsseStatus psse_solve_stochastic(const struct PsseMeasurementSet *set,
                                      const struct PsseStochasticParams *params,
                                      const double *v0_re,
                                      const double *v0_im,
                                      size_t n,
                                      double *out_re,
                                      double *out_im,
                                      size_t *out_iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSSE_H */
