/* C ABI for the projconv decider, simulator, forge, and verifier.
 * All returned strings are owned by the library; release them with
 * projconv_string_free. Handles are opaque; release with
 * projconv_system_free. Functions returning ProjconvStatus leave a
 * diagnostic retrievable via projconv_last_error on failure. */

#ifndef PROJCONV_H
#define PROJCONV_H

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; nonzero values match the command-line exit codes.
typedef enum ProjconvStatus {
  PROJCONV_STATUS_OK = 0,
  PROJCONV_STATUS_ERROR = 1,
  PROJCONV_STATUS_PARSE_ERROR = 2,
  PROJCONV_STATUS_EXCLUDED = 3,
  PROJCONV_STATUS_NOT_APPLICABLE = 4,
  PROJCONV_STATUS_CERTIFICATION_FAILED = 5,
  PROJCONV_STATUS_INVALID_ARGUMENT = 7,
} ProjconvStatus;

// Opaque handle to a parsed matrix system.
typedef struct ProjconvSystem ProjconvSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum ProjconvStatus projconv_system_parse(const char *json, struct ProjconvSystem **out);

// # Safety
// `system` must be a pointer returned by `projconv_system_parse`, not yet
// freed, or null.
void projconv_system_free(struct ProjconvSystem *system);

// Number of matrices in the system's alphabet.
//
// # Safety
// `system` must be a live handle.
uintptr_t projconv_system_alphabet_len(const struct ProjconvSystem *system);

// Decides pointwise convergence for every admissible sequence; writes the
// verdict as JSON.
//
// # Safety
// `system` must be a live handle and `out_json` a valid pointer.
enum ProjconvStatus projconv_decide(const struct ProjconvSystem *system, char **out_json);

// Simulates one symbol sequence and writes the trace as CSV. `omega` uses
// the same forms as the command line: digits, `cycle:<digits>`,
// `random:<seed>`, or `forge`. Returns `Excluded` when the path was
// annihilated (the partial trace is still written).
//
// # Safety
// `system` must be a live handle; `omega` a valid NUL-terminated string;
// `out_csv` a valid pointer.
enum ProjconvStatus projconv_simulate_csv(const struct ProjconvSystem *system,
                                          const char *omega,
                                          uint64_t steps,
                                          bool exact,
                                          char **out_csv);

// Constructs and certifies a divergent sequence; writes the certificate as
// JSON. `delta_min` is a positive rational such as `"1/1000"` or `"0.001"`.
//
// # Safety
// `system` must be a live handle; `delta_min` a valid NUL-terminated
// string; `out_json` a valid pointer.
enum ProjconvStatus projconv_forge(const struct ProjconvSystem *system,
                                   uint64_t steps,
                                   const char *delta_min,
                                   char **out_json);

// Exhaustively checks the exact identities over all symbol prefixes up to
// `depth`; writes a JSON report. Returns `Error` when violations were
// found (the report is still written) or the budget was exceeded.
//
// # Safety
// `system` must be a live handle and `out_json` a valid pointer.
enum ProjconvStatus projconv_verify(const struct ProjconvSystem *system,
                                    uint32_t depth,
                                    uint64_t budget,
                                    char **out_json);

// Probes the three-series finiteness data over a forged or explicit
// sequence; writes a JSON report.
//
// # Safety
// `system` must be a live handle; `omega` a valid NUL-terminated string;
// `out_json` a valid pointer.
enum ProjconvStatus projconv_series_probe(const struct ProjconvSystem *system,
                                          const char *omega,
                                          uint64_t steps,
                                          char **out_json);

// Releases a string returned by this library.
//
// # Safety
// `text` must be a pointer previously returned through an out-parameter of
// this library, not yet freed, or null.
void projconv_string_free(char *text);

// The most recent error message on this thread, or null. The returned
// string must be released with `projconv_string_free`.
char *projconv_last_error(void);

// Library version as a static string; do not free.
const char *projconv_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROJCONV_H */
