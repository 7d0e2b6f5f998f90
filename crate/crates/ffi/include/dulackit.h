#ifndef DULACKIT_H
#define DULACKIT_H

#include <stddef.h>
#include <stdint.h>

/**
 * Status codes. The first five match the command-line exit codes.
 */
typedef enum DulacStatus {
  DULAC_STATUS_OK = 0,
  DULAC_STATUS_VERIFY_FAILED = 1,
  DULAC_STATUS_HYPOTHESIS_FAILED = 2,
  DULAC_STATUS_PARSE_ERROR = 3,
  DULAC_STATUS_REFUSED = 4,
  DULAC_STATUS_NULL_POINTER = 5,
  DULAC_STATUS_INVALID_ARGUMENT = 6,
  DULAC_STATUS_BUFFER_TOO_SMALL = 7,
  DULAC_STATUS_COMPUTATION_FAILED = 8,
  DULAC_STATUS_PANIC = 9,
} DulacStatus;

/**
 * Coefficients `c_0..c_ell` of one expansion.
 */
typedef struct DulacExpansion DulacExpansion;

/**
 * A parsed problem spec.
 */
typedef struct DulacSpec DulacSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *dulac_version(void);

/**
 * Message for the last failure on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *dulac_last_error(void);

/**
 * # Safety
 * `s` is NULL or was returned by this library and not yet freed.
 */
void dulac_string_free(char *s);

/**
 * Parses a JSON problem spec.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum DulacStatus dulac_spec_from_json(const char *json, struct DulacSpec **out);

/**
 * # Safety
 * `spec` is NULL or a live handle from [`dulac_spec_from_json`].
 */
void dulac_spec_free(struct DulacSpec *spec);

/**
 * Hypothesis report on both sides of `eps = 0`. The JSON is written even
 * when a hypothesis fails, in which case the status is `HYPOTHESIS_FAILED`.
 *
 * # Safety
 * `spec` is a live handle; `out_json` is writable.
 */
enum DulacStatus dulac_check(const struct DulacSpec *spec, char **out_json);

/**
 * Flatness verification report. `VERIFY_FAILED` when a verdict fails.
 *
 * # Safety
 * `spec` is a live handle; `out_json` is writable.
 */
enum DulacStatus dulac_verify(const struct DulacSpec *spec, char **out_json);

/**
 * Loud family report. `VERIFY_FAILED` when a verdict fails.
 *
 * # Safety
 * `spec` is a live handle; `out_json` is writable.
 */
enum DulacStatus dulac_loud(const struct DulacSpec *spec, char **out_json);

/**
 * Expansion of the `index`-th `(eps, lambda)` pair of an orbit or
 * dulac_map spec, eps-major, up to order `ell`. `REFUSED` when the
 * hypotheses fail on that side.
 *
 * # Safety
 * `spec` is a live handle; `out` is writable.
 */
enum DulacStatus dulac_expand(const struct DulacSpec *spec,
                              size_t index,
                              size_t ell,
                              struct DulacExpansion **out);

/**
 * Number of coefficients, `ell + 1`; 0 for NULL.
 *
 * # Safety
 * `h` is NULL or a live handle.
 */
size_t dulac_expansion_len(const struct DulacExpansion *h);

/**
 * 1 when the coefficients were computed in exact arithmetic.
 *
 * # Safety
 * `h` is NULL or a live handle.
 */
int32_t dulac_expansion_is_exact(const struct DulacExpansion *h);

/**
 * Copies the coefficients as doubles into `out[0..cap]`.
 *
 * # Safety
 * `h` is a live handle; `out` has room for `cap` doubles.
 */
enum DulacStatus dulac_expansion_coeffs(const struct DulacExpansion *h, double *out, size_t cap);

/**
 * Coefficient `j` as text, e.g. `"-3/4"`; owned by the handle.
 * NULL when `j` is out of range.
 *
 * # Safety
 * `h` is NULL or a live handle.
 */
const char *dulac_expansion_coeff_text(const struct DulacExpansion *h, size_t j);

/**
 * # Safety
 * `h` is NULL or a live handle from [`dulac_expand`].
 */
void dulac_expansion_free(struct DulacExpansion *h);

/**
 * Gamma function in double precision.
 *
 * # Safety
 * `out` is writable.
 */
enum DulacStatus dulac_gamma(double x, double *out);

/**
 * First period coefficient of the Loud family at `(D, F)`.
 *
 * # Safety
 * `out` is writable.
 */
enum DulacStatus dulac_loud_c1_hat(double d, double f, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DULACKIT_H */
