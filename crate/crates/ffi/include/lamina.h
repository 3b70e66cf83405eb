#ifndef LAMINA_H
#define LAMINA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  LAMINA_STATUS_OK = 0,
  LAMINA_STATUS_NULL_POINTER = 1,
  LAMINA_STATUS_INVALID_UTF8 = 2,
  LAMINA_STATUS_CONFIG = 3,
  LAMINA_STATUS_IO = 4,
  LAMINA_STATUS_DOMAIN = 5,
  LAMINA_STATUS_INVALID_ARGUMENT = 6,
  LAMINA_STATUS_COMPUTATION = 7,
  LAMINA_STATUS_PANIC = 8,
} LaminaStatus;

/**
 * A Dirichlet problem: domain, boundary data and solver options.
 */
typedef struct LaminaProblem LaminaProblem;

/**
 * A solved problem.
 */
typedef struct LaminaSolution LaminaSolution;

/**
 * Library version as a static NUL-terminated string.
 */
const char *lamina_version(void);

/**
 * Message of the last failed call on this thread; empty when none failed.
 * Valid until the next failing call on the same thread.
 */
const char *lamina_last_error(void);

/**
 * Parses a problem from JSON text. Relative paths inside it resolve
 * against `base_dir`, which may be null.
 *
 * # Safety
 * `json` and non-null `base_dir` are NUL-terminated strings; `out` is a
 * valid pointer.
 */
LaminaStatus lamina_problem_from_json(const char *json, const char *base_dir, LaminaProblem **out);

/**
 * Loads a problem from a JSON file.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is a valid pointer.
 */
LaminaStatus lamina_problem_load(const char *path, LaminaProblem **out);

/**
 * # Safety
 * `p` is null or a handle from `lamina_problem_*` not yet freed.
 */
void lamina_problem_free(LaminaProblem *p);

/**
 * Grid shape: `nx` by `ny` cells of side `h`, `(nx + 1) (ny + 1)` nodes
 * numbered row by row from the bottom left.
 *
 * # Safety
 * `p` is a live handle; the out pointers are valid.
 */
LaminaStatus lamina_problem_grid(const LaminaProblem *p, size_t *nx, size_t *ny, double *h);

/**
 * Exact minimum cut value of the superlevel problem at threshold `y`.
 *
 * # Safety
 * `p` is a live handle; `value` is a valid pointer.
 */
LaminaStatus lamina_mincut(const LaminaProblem *p, double y, double *value);

/**
 * Integral of the minimum cut value over all thresholds, an exact
 * reference for the solver energy.
 *
 * # Safety
 * `p` is a live handle; `value` is a valid pointer.
 */
LaminaStatus lamina_mincut_energy(const LaminaProblem *p, size_t max_levels, double *value);

/**
 * Solves the problem. `max_iter` of zero keeps the configured limit.
 *
 * # Safety
 * `p` is a live handle; `out` is a valid pointer.
 */
LaminaStatus lamina_solve(const LaminaProblem *p, size_t max_iter, LaminaSolution **out);

/**
 * # Safety
 * `s` is null or a handle from [`lamina_solve`] not yet freed.
 */
void lamina_solution_free(LaminaSolution *s);

/**
 * Copies the nodal solution into `buf`, which must hold at least the
 * node count written to `len` on return.
 *
 * # Safety
 * `s` is a live handle; `buf` is null or holds `*len` doubles; `len` is valid.
 */
LaminaStatus lamina_solution_values(const LaminaSolution *s, double *buf, size_t *len);

/**
 * Weighted total variation plus boundary misfit of the solution, with the
 * final duality gap and whether the solver converged.
 *
 * # Safety
 * `s` is a live handle; the out pointers are valid.
 */
LaminaStatus lamina_solution_summary(const LaminaSolution *s,
                                     double *energy,
                                     double *gap,
                                     bool *converged);

/**
 * Runs a scenario file and its checks, writing artifacts under `out_dir`
 * (null for `out/<name>`).
 *
 * # Safety
 * `path` and non-null `out_dir` are NUL-terminated strings; `passed` is valid.
 */
LaminaStatus lamina_verify(const char *path, const char *out_dir, bool *passed);

#endif  /* LAMINA_H */
