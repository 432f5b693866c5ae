#ifndef TRAJDIFF_H
#define TRAJDIFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum TdStatus {
  TD_STATUS_OK = 0,
  TD_STATUS_NULL_POINTER = 1,
  TD_STATUS_INVALID_ARGUMENT = 2,
  TD_STATUS_UNKNOWN_NAME = 3,
  TD_STATUS_DIMENSION = 4,
  TD_STATUS_INVALID_PROBLEM = 5,
  TD_STATUS_INVALID_CONFIG = 6,
  TD_STATUS_NON_FINITE = 7,
  TD_STATUS_BARRIER_DOMAIN = 8,
  TD_STATUS_STEP_REJECTED = 9,
  TD_STATUS_PANIC = 10,
} TdStatus;

typedef enum TdGradient {
  TD_GRADIENT_EXACT = 0,
  TD_GRADIENT_FINITE_DIFFERENCE = 1,
  TD_GRADIENT_SMOOTHED = 2,
} TdGradient;

// Opaque result of a batch; chains are borrowed from it.
typedef struct TdBatch TdBatch;

// Opaque benchmark problem.
typedef struct TdProblem TdProblem;

// Opaque result of one chain.
typedef struct TdSolution TdSolution;

// Diffusion settings. Obtain defaults from [`td_config_default`].
typedef struct TdConfig {
  double alpha;
  double mu;
  double sigma0;
  double gamma;
  double sigma_min;
  uint64_t iterations;
  double barrier_weight;
  double barrier_decay;
  uint64_t seed;
  // 0 disables snapshots.
  uint64_t snapshot_stride;
  enum TdGradient gradient;
  // Finite-difference step.
  double fd_step;
  // Smoothed estimator draws and standard deviation; the draws are
  // seeded from `seed`.
  uint64_t smoothing_samples;
  double smoothing_stddev;
} TdConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *td_last_error_message(void);

void td_clear_error(void);

// # Safety
// `out` must be null or point to writable storage for a `TdConfig`.
enum TdStatus td_config_default(struct TdConfig *out);

// Recomputes `gamma` so the noise reaches `sigma_min` at the default
// fraction of `iterations`.
//
// # Safety
// `config` must be null or point to a valid `TdConfig`.
enum TdStatus td_config_reanneal(struct TdConfig *config);

// Builds a benchmark by name (`pendulum`, `bugtrap`, `toy_kkt`).
//
// # Safety
// `name` must be null or a NUL-terminated string; `out` must be null or
// writable.
enum TdStatus td_problem_new(const char *name, struct TdProblem **out);

// # Safety
// `problem` must be null or a handle from [`td_problem_new`] not yet freed.
void td_problem_free(struct TdProblem *problem);

// Number of decision variables, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t td_problem_num_variables(const struct TdProblem *problem);

// # Safety
// `problem` must be null or a live handle.
size_t td_problem_num_constraints(const struct TdProblem *problem);

// Writes the randomized initial guess for `seed` into `out[0..len]`;
// `len` must equal the number of variables.
//
// # Safety
// `problem` must be a live handle and `out` valid for `len` writes.
enum TdStatus td_problem_initial_guess(const struct TdProblem *problem,
                                       uint64_t seed,
                                       double *out,
                                       size_t len);

// Runs one diffusion chain from `x0` (length `n`) and multipliers
// `lambda0` (length `m`; null means all zeros). On failure `*out` is
// null.
//
// # Safety
// `problem` and `config` must be live; `x0` valid for `n` reads;
// `lambda0` null or valid for `m` reads; `out` writable.
enum TdStatus td_solve(const struct TdProblem *problem,
                       const struct TdConfig *config,
                       const double *x0,
                       size_t n,
                       const double *lambda0,
                       size_t m,
                       struct TdSolution **out);

// Runs `chains` independent diffusion chains from the row-major
// `x0s[chains × n]`; chain `i` uses seed `config.seed + i` and zero
// multipliers. `threads = 0` uses the global pool. Individual chain
// failures are reported through [`td_batch_status`].
//
// # Safety
// `problem` and `config` must be live; `x0s` valid for `chains · n`
// reads; `out` writable.
enum TdStatus td_solve_batch(const struct TdProblem *problem,
                             const struct TdConfig *config,
                             const double *x0s,
                             size_t chains,
                             size_t n,
                             size_t threads,
                             struct TdBatch **out);

// # Safety
// `batch` must be null or a live handle.
void td_batch_free(struct TdBatch *batch);

// # Safety
// `batch` must be null or a live handle.
size_t td_batch_len(const struct TdBatch *batch);

// Status of chain `index`; on failure the message is stored as the last
// error.
//
// # Safety
// `batch` must be null or a live handle.
enum TdStatus td_batch_status(const struct TdBatch *batch, size_t index);

// Borrowed view of a successful chain, or null. Valid while the batch
// lives; do not free it.
//
// # Safety
// `batch` must be null or a live handle.
const struct TdSolution *td_batch_solution(const struct TdBatch *batch, size_t index);

// # Safety
// `solution` must be null or a handle returned by [`td_solve`].
void td_solution_free(struct TdSolution *solution);

// `‖h(x̄)‖²` at the final point, NaN for a null handle.
//
// # Safety
// `solution` must be null or live.
double td_solution_violation(const struct TdSolution *solution);

// # Safety
// `solution` must be null or live.
double td_solution_cost(const struct TdSolution *solution);

// # Safety
// `solution` must be null or live.
size_t td_solution_iterations(const struct TdSolution *solution);

// # Safety
// `solution` must be null or live.
double td_solution_duration_ms(const struct TdSolution *solution);

// Number of trace records (one per iteration).
//
// # Safety
// `solution` must be null or live.
size_t td_solution_trace_len(const struct TdSolution *solution);

// Copies the final decision vector; `len` must equal its length.
//
// # Safety
// `solution` must be live and `out` valid for `len` writes.
enum TdStatus td_solution_xbar(const struct TdSolution *solution, double *out, size_t len);

// # Safety
// `solution` must be live and `out` valid for `len` writes.
enum TdStatus td_solution_lambda(const struct TdSolution *solution, double *out, size_t len);

// Copies the per-iteration `‖h‖²` trace; `len` must equal
// [`td_solution_trace_len`].
//
// # Safety
// `solution` must be live and `out` valid for `len` writes.
enum TdStatus td_solution_hsq_trace(const struct TdSolution *solution, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAJDIFF_H */
