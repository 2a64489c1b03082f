#ifndef FIREGRID_H
#define FIREGRID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed JSON, CSV or MPS.
   */
  FG_STATUS_PARSE_ERROR = 3,
  FG_STATUS_INVALID_INPUT = 4,
  FG_STATUS_BUILD_ERROR = 5,
  FG_STATUS_SOLVE_ERROR = 6,
  /*
   The requested value does not exist, e.g. the objective of an
   infeasible solve.
   */
  FG_STATUS_NOT_AVAILABLE = 7,
  /*
   A panic was caught at the boundary.
   */
  FG_STATUS_INTERNAL = 8,
} FgStatus;

typedef enum FgSolveStatus {
  FG_SOLVE_STATUS_OPTIMAL = 0,
  FG_SOLVE_STATUS_FEASIBLE_GAPPED = 1,
  FG_SOLVE_STATUS_INFEASIBLE = 2,
  FG_SOLVE_STATUS_TIME_LIMIT = 3,
  FG_SOLVE_STATUS_ERROR = 4,
} FgSolveStatus;

/*
 A built scenario model.
 */
typedef struct FgModel FgModel;

/*
 Network with horizon, demands and group fractions.
 */
typedef struct FgNetwork FgNetwork;

/*
 Line/day risk and categories.
 */
typedef struct FgRisk FgRisk;

/*
 Result of a solve.
 */
typedef struct FgSolution FgSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer is
 valid until the next failing call on the same thread.
 */
const char *fg_last_error_message(void);

/*
 Library version as a static string.
 */
const char *fg_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be freed twice.
 */
void fg_string_free(char *s);

/*
 Parses a network JSON document.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum FgStatus fg_network_from_json(const char *json, struct FgNetwork **out);

/*
 Counts validation errors and optionally returns the full report, one
 violation per line.

 # Safety
 `net` must be a live handle; `errors` must be writable; `report` may be
 null.
 */
enum FgStatus fg_network_validate(const struct FgNetwork *net, size_t *errors, char **report);

/*
 # Safety
 `net` must be null or a handle not yet freed.
 */
void fg_network_free(struct FgNetwork *net);

/*
 Parses a risk profile JSON document.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum FgStatus fg_risk_from_json(const char *json, struct FgRisk **out);

/*
 # Safety
 `risk` must be null or a handle not yet freed.
 */
void fg_risk_free(struct FgRisk *risk);

/*
 Builds the model for `model_id` (e.g. `"E-M8"`) at `budget` million USD.
 `baseline` is the no-hardening solve needed by load-shed policy models
 and may be null otherwise. Equity models balance every network group.

 # Safety
 Handles must be live; `model_id` NUL-terminated; `out` writable.
 */
enum FgStatus fg_model_build(const struct FgNetwork *net,
                             const struct FgRisk *risk,
                             const char *model_id,
                             double budget,
                             const struct FgSolution *baseline,
                             struct FgModel **out);

/*
 Number of binary columns, fixed ones included.

 # Safety
 `model` must be a live handle.
 */
enum FgStatus fg_model_num_binaries(const struct FgModel *model, size_t *out);

/*
 Free-format MPS text of the model.

 # Safety
 `model` must be a live handle; `out` writable.
 */
enum FgStatus fg_model_emit_mps(const struct FgModel *model, char **out);

/*
 Model as JSON, the format the CLI's `solve` reads.

 # Safety
 `model` must be a live handle; `out` writable.
 */
enum FgStatus fg_model_to_json(const struct FgModel *model, char **out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void fg_model_free(struct FgModel *model);

/*
 Solves with the built-in branch and bound. An infeasible model is not a
 failure: the call succeeds and the solution reports its status.

 # Safety
 `model` must be a live handle; `out` writable.
 */
enum FgStatus fg_solve(const struct FgModel *model,
                       double mip_gap,
                       double time_limit_s,
                       struct FgSolution **out);

/*
 Solves by enumerating every binary assignment. Fails with
 [`FgStatus::SolveError`] when the model has more than `cap` free binaries.

 # Safety
 `model` must be a live handle; `out` writable.
 */
enum FgStatus fg_solve_oracle(const struct FgModel *model, size_t cap, struct FgSolution **out);

/*
 Re-solves an equity solution for least total shed with its switching
 and hardening decisions and the equity level held.

 # Safety
 Handles must be live; `out` writable.
 */
enum FgStatus fg_postprocess_equity(const struct FgModel *model,
                                    const struct FgNetwork *net,
                                    const struct FgSolution *sol,
                                    struct FgSolution **out);

/*
 # Safety
 `sol` must be a live handle; `out` writable.
 */
enum FgStatus fg_solution_status(const struct FgSolution *sol, enum FgSolveStatus *out);

/*
 # Safety
 `sol` must be a live handle; `out` writable.
 */
enum FgStatus fg_solution_objective(const struct FgSolution *sol, double *out);

/*
 Value of a named variable, e.g. `"z_L1_201"`.

 # Safety
 `sol` must be a live handle; `name` NUL-terminated; `out` writable.
 */
enum FgStatus fg_solution_value(const struct FgSolution *sol, const char *name, double *out);

/*
 # Safety
 `sol` must be a live handle; `out` writable.
 */
enum FgStatus fg_solution_to_json(const struct FgSolution *sol, char **out);

/*
 Parses a solution JSON, e.g. a baseline written by the CLI.

 # Safety
 `json` must be NUL-terminated; `out` writable.
 */
enum FgStatus fg_solution_from_json(const char *json, struct FgSolution **out);

/*
 # Safety
 `sol` must be null or a handle not yet freed.
 */
void fg_solution_free(struct FgSolution *sol);

/*
 Per-group load shed, unfairness, budget and risk-reduction metrics as
 JSON.

 # Safety
 Handles must be live; `out` writable.
 */
enum FgStatus fg_group_metrics_json(const struct FgNetwork *net,
                                    const struct FgRisk *risk,
                                    const struct FgSolution *sol,
                                    char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIREGRID_H */
