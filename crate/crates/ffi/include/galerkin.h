#ifndef GALERKIN_H
#define GALERKIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_NULL_POINTER = 1,
  GK_STATUS_INVALID_ARGUMENT = 2,
  GK_STATUS_NOT_POSITIVE_DEFINITE = 3,
  GK_STATUS_NOT_HERMITIAN = 4,
  GK_STATUS_DIMENSION_MISMATCH = 5,
  GK_STATUS_NO_CONVERGENCE = 6,
  GK_STATUS_SHIFT_NOT_BELOW_SPECTRUM = 7,
  GK_STATUS_NOT_NESTED = 8,
  GK_STATUS_IO = 9,
  GK_STATUS_FORMAT = 10,
  GK_STATUS_NUMERICAL = 11,
  GK_STATUS_PANIC = 12,
} GkStatus;

/**
 * Built-in problem families.
 */
typedef enum GkProblem {
  GK_PROBLEM_FOURIER_RANK_ONE = 0,
  GK_PROBLEM_BLOCK_FEM = 1,
} GkProblem;

typedef enum GkMode {
  GK_MODE_DIRECT = 0,
  GK_MODE_INVERSE = 1,
} GkMode;

/**
 * Form matrices `(T̂, M)` on one trial space.
 */
typedef struct GkForms GkForms;

/**
 * Result of a two-stage run.
 */
typedef struct GkRun GkRun;

/**
 * A list of complex eigenvalues.
 */
typedef struct GkSpectrum GkSpectrum;

typedef struct GkComplex {
  double re;
  double im;
} GkComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gk_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * NUL-terminated when `cap > 0`). Returns the full message length in bytes,
 * without the terminator; 0 when no error was recorded.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or be `NULL` with `cap == 0`.
 */
size_t gk_last_error_message(char *buf, size_t cap);

/**
 * Assembles the form matrices of a built-in problem at `level`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GkStatus gk_forms_assemble(enum GkProblem problem, size_t level, struct GkForms **out);

/**
 * Builds forms from row-major `dim × dim` arrays; runs the Hermiticity and
 * positive-definiteness checks.
 *
 * # Safety
 * `t_hat` and `mass` must point to `dim * dim` elements; `out` must be valid.
 */
enum GkStatus gk_forms_from_arrays(size_t dim,
                                   const struct GkComplex *t_hat,
                                   const struct GkComplex *mass,
                                   struct GkForms **out);

/**
 * Loads forms from a matrix file (text or binary variant).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum GkStatus gk_forms_import(const char *path, struct GkForms **out);

/**
 * Dimension of the trial space; 0 for `NULL`.
 *
 * # Safety
 * `forms` must be `NULL` or a live handle.
 */
size_t gk_forms_dim(const struct GkForms *forms);

/**
 * # Safety
 * `forms` must be `NULL` or a handle not yet freed.
 */
void gk_forms_free(struct GkForms *forms);

/**
 * Galerkin eigenvalues `σ(T, L)`, ascending.
 *
 * # Safety
 * `forms` must be a live handle; `out` must be valid.
 */
enum GkStatus gk_spectrum_of_t(const struct GkForms *forms, struct GkSpectrum **out);

/**
 * # Safety
 * `spectrum` must be `NULL` or a live handle.
 */
size_t gk_spectrum_len(const struct GkSpectrum *spectrum);

/**
 * Copies the values into `out`, which must hold at least
 * `gk_spectrum_len` elements.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` valid for `cap` elements.
 */
enum GkStatus gk_spectrum_copy(const struct GkSpectrum *spectrum,
                               struct GkComplex *out,
                               size_t cap);

/**
 * # Safety
 * `spectrum` must be `NULL` or a handle not yet freed.
 */
void gk_spectrum_free(struct GkSpectrum *spectrum);

/**
 * `σₙ(z)`, the smallest whitened singular value of `T̂ − zM`.
 *
 * # Safety
 * `forms` must be a live handle; `out` must be valid.
 */
enum GkStatus gk_sigma_n(const struct GkForms *forms, struct GkComplex z, double *out);

/**
 * Two-stage run of a built-in problem: stage one on `coarse` with window
 * `(a, b)`, stage two on `fine`. In inverse mode `a`, `b` are in resolvent
 * coordinates `1/(λ − gamma)`; `gamma` is ignored in direct mode.
 *
 * # Safety
 * `out` must be valid.
 */
enum GkStatus gk_two_stage(enum GkProblem problem,
                           size_t coarse,
                           size_t fine,
                           double a,
                           double b,
                           enum GkMode mode,
                           double gamma,
                           struct GkRun **out);

/**
 * Rank of `Q`; 0 for `NULL`.
 *
 * # Safety
 * `run` must be `NULL` or a live handle.
 */
size_t gk_run_rank(const struct GkRun *run);

/**
 * Number of stage-two eigenvalues.
 *
 * # Safety
 * `run` must be `NULL` or a live handle.
 */
size_t gk_run_stage_two_len(const struct GkRun *run);

/**
 * Copies the stage-two eigenvalues (window coordinates).
 *
 * # Safety
 * `run` must be a live handle and `out` valid for `cap` elements.
 */
enum GkStatus gk_run_stage_two_copy(const struct GkRun *run, struct GkComplex *out, size_t cap);

/**
 * Number of entries in the pollution report.
 *
 * # Safety
 * `run` must be `NULL` or a live handle.
 */
size_t gk_run_pollution_len(const struct GkRun *run);

/**
 * Stage-one value `index` of the pollution report and whether it was
 * confirmed as genuine.
 *
 * # Safety
 * `run` must be a live handle; `value` and `genuine` must be valid.
 */
enum GkStatus gk_run_pollution_entry(const struct GkRun *run,
                                     size_t index,
                                     double *value,
                                     bool *genuine);

/**
 * JSON summary of a run (clusters, pollution, residuals). Release with
 * [`gk_string_free`]. Returns `NULL` on failure.
 *
 * # Safety
 * `run` must be a live handle.
 */
char *gk_run_to_json(const struct GkRun *run);

/**
 * # Safety
 * `s` must be `NULL` or a string returned by this library and not yet freed.
 */
void gk_string_free(char *s);

/**
 * # Safety
 * `run` must be `NULL` or a handle not yet freed.
 */
void gk_run_free(struct GkRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GALERKIN_H */
