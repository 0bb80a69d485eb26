#ifndef HESSFLOW_H
#define HESSFLOW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_UTF8 = 2,
  HF_STATUS_CONFIG = 3,
  HF_STATUS_SOLVER = 4,
  HF_STATUS_AUDIT = 5,
  HF_STATUS_OUT_OF_RANGE = 6,
  HF_STATUS_PANIC = 7,
} HfStatus;

/**
 * A validated problem at its base resolution.
 */
typedef struct HfProblem HfProblem;

/**
 * A solved trajectory.
 */
typedef struct HfTrajectory HfTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hf_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *hf_last_error(void);

/**
 * Parses and validates a problem file given as TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HfStatus hf_problem_from_toml(const char *toml, struct HfProblem **out);

/**
 * # Safety
 * `p` must come from [`hf_problem_from_toml`] and not be used afterwards.
 */
void hf_problem_free(struct HfProblem *p);

/**
 * Number of grid nodes, i.e. the length of every state.
 *
 * # Safety
 * `p` must be a live problem handle and `out` a valid pointer.
 */
enum HfStatus hf_problem_node_count(const struct HfProblem *p, uintptr_t *out);

/**
 * Structure and hypothesis checks as a JSON object. Returns
 * [`HfStatus::Audit`] (with the JSON still written) when an asserted
 * condition fails.
 *
 * # Safety
 * `p` must be a live problem handle and `out` a valid pointer.
 */
enum HfStatus hf_check_json(const struct HfProblem *p, char **out);

/**
 * Solves the problem with its own solver settings.
 *
 * # Safety
 * `p` must be a live problem handle and `out` a valid pointer.
 */
enum HfStatus hf_solve(const struct HfProblem *p, struct HfTrajectory **out);

/**
 * # Safety
 * `t` must come from [`hf_solve`] and not be used afterwards.
 */
void hf_trajectory_free(struct HfTrajectory *t);

/**
 * Number of stored states (initial state included).
 *
 * # Safety
 * `t` must be a live trajectory handle and `out` a valid pointer.
 */
enum HfStatus hf_trajectory_len(const struct HfTrajectory *t, uintptr_t *out);

/**
 * Copies stored state `index` into `buf` of length `len`, and its time into `time`.
 *
 * # Safety
 * `t` must be a live trajectory handle, `buf` must hold `len` doubles and
 * `time` must be a valid pointer.
 */
enum HfStatus hf_trajectory_state(const struct HfTrajectory *t,
                                  uintptr_t index,
                                  double *buf,
                                  uintptr_t len,
                                  double *time);

/**
 * Barrier, test-function, boundary and ratio audits of one trajectory as
 * JSON. Returns [`HfStatus::Audit`] (with the JSON still written) when an
 * audit assertion fails.
 *
 * # Safety
 * `p` and `t` must be live handles with `t` solved from `p`, and `out` a
 * valid pointer.
 */
enum HfStatus hf_audit_json(const struct HfProblem *p, const struct HfTrajectory *t, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HESSFLOW_H */
