#ifndef HOLONOMY_H
#define HOLONOMY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum HolonomyStatus {
  HOLONOMY_OK = 0,
  HOLONOMY_NULL_POINTER = 1,
  HOLONOMY_INVALID_UTF8 = 2,
  HOLONOMY_INVALID_ARGUMENT = 3,
  HOLONOMY_PARSE_ERROR = 4,
  HOLONOMY_UNKNOWN_BUILTIN = 5,
  HOLONOMY_DERIVATION_FAILED = 6,
  HOLONOMY_EVALUATION_FAILED = 7,
  HOLONOMY_BUFFER_TOO_SMALL = 8,
  HOLONOMY_PANIC = 9,
} HolonomyStatus;

/**
 * A frame ansatz together with its structure kind.
 */
typedef struct HolonomyAnsatz HolonomyAnsatz;

/**
 * A derived first-order flow system.
 */
typedef struct HolonomyFlow HolonomyFlow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *holonomy_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *holonomy_version(void);

/**
 * Creates a handle for a built-in ansatz such as `"brandhuber"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HolonomyStatus holonomy_ansatz_builtin(const char *name, struct HolonomyAnsatz **out);

/**
 * Parses an ansatz document; it must declare its structure.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HolonomyStatus holonomy_ansatz_parse(const char *text, struct HolonomyAnsatz **out);

/**
 * Releases an ansatz handle. Null is ignored.
 *
 * # Safety
 * `ansatz` must come from a constructor of this library and not be used
 * afterwards.
 */
void holonomy_ansatz_free(struct HolonomyAnsatz *ansatz);

/**
 * Frame dimension of the ansatz, 0 for null.
 *
 * # Safety
 * `ansatz` must be null or a live handle.
 */
size_t holonomy_ansatz_dim(const struct HolonomyAnsatz *ansatz);

/**
 * Largest torsion coefficient over `points` seeded samples. With
 * `derived_closure` nonzero the flow is derived first and substituted.
 *
 * # Safety
 * `ansatz` must be a live handle and `max_residual` a valid pointer.
 */
enum HolonomyStatus holonomy_verify(const struct HolonomyAnsatz *ansatz,
                                    int32_t derived_closure,
                                    size_t points,
                                    uint64_t seed,
                                    double *max_residual);

/**
 * Derives the first-order flow of the ansatz with automatic scale
 * selection.
 *
 * # Safety
 * `ansatz` must be a live handle and `out` a valid pointer.
 */
enum HolonomyStatus holonomy_derive(const struct HolonomyAnsatz *ansatz, struct HolonomyFlow **out);

/**
 * Releases a flow handle. Null is ignored.
 *
 * # Safety
 * `flow` must come from [`holonomy_derive`] and not be used afterwards.
 */
void holonomy_flow_free(struct HolonomyFlow *flow);

/**
 * Number of unknowns, 0 for null.
 *
 * # Safety
 * `flow` must be null or a live handle.
 */
size_t holonomy_flow_dim(const struct HolonomyFlow *flow);

/**
 * Nonzero when every closure condition was certified after substitution.
 *
 * # Safety
 * `flow` must be null or a live handle.
 */
int32_t holonomy_flow_certified(const struct HolonomyFlow *flow);

/**
 * Writes the `du/dt = rhs` lines into `buf`. `needed` receives the size
 * including the terminating NUL; pass a null `buf` to query it.
 *
 * # Safety
 * `flow` must be a live handle, `buf` null or writable for `len` bytes,
 * `needed` null or valid.
 */
enum HolonomyStatus holonomy_flow_render(const struct HolonomyFlow *flow,
                                         char *buf,
                                         size_t len,
                                         size_t *needed);

/**
 * Evaluates the right-hand side at `(t, y)` into `dy`; both arrays have
 * `n` entries in unknown order.
 *
 * # Safety
 * `flow` must be a live handle; `y` and `dy` must hold `n` doubles.
 */
enum HolonomyStatus holonomy_flow_eval(const struct HolonomyFlow *flow,
                                       double t,
                                       const double *y,
                                       size_t n,
                                       double *dy);

/**
 * Runs a command line exactly like the `holonomy` executable. `argv`
 * excludes the program name. The JSON report (possibly empty) is returned
 * in `report`, to be released with [`holonomy_string_free`].
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings; `report` and `exit_code`
 * must be valid pointers.
 */
enum HolonomyStatus holonomy_run_command(const char *const *argv,
                                         size_t argc,
                                         char **report,
                                         int32_t *exit_code);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void holonomy_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOLONOMY_H */
