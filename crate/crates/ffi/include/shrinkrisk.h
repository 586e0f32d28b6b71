#ifndef SHRINKRISK_H
#define SHRINKRISK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes shared by every entry point.
typedef enum ShrStatus {
  SHR_STATUS_OK = 0,
  SHR_STATUS_NULL_POINTER = 1,
  SHR_STATUS_INVALID_ARGUMENT = 2,
  SHR_STATUS_DIMENSION = 3,
  SHR_STATUS_NOT_SPD = 4,
  SHR_STATUS_DEGENERATE_GRAM = 5,
  SHR_STATUS_SINGULAR_GRAM = 6,
  SHR_STATUS_MOMENT_NOT_FINITE = 7,
  SHR_STATUS_ASPECT_RATIO = 8,
  SHR_STATUS_PANIC = 9,
} ShrStatus;

// Opaque design handle: a full-rank `X` together with its `Σ`.
typedef struct ShrDesign ShrDesign;

typedef struct ShrPhaseVerdict {
  // 1 when the worst-case risk exceeds the maximum-likelihood limit.
  int32_t fails;
  double sup_r;
  double argmax_delta2;
  double ml_limit;
  double gap;
  // `gap/2` in the failure region, otherwise NaN.
  double epsilon;
  // 1 when the numerical gap agrees with the closed-form region.
  int32_t consistent;
} ShrPhaseVerdict;

typedef struct ShrRiskReport {
  double c;
  double rho1_ml;
  double rho1_c;
  double rho2_ml;
  double rho2_c;
  double rel_oos;
  double ncp;
  double snr;
} ShrRiskReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the last failure on this thread into `buf`
// (NUL-terminated, truncated to `len − 1` bytes). Returns the full message
// length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t shr_last_error(char *buf, size_t len);

// `E[(1/χ²_k(λ))^order]` for `order ∈ {1, 2}`, `k > 2·order`.
//
// # Safety
// `result` must be null or valid for writes.
enum ShrStatus shr_inv_moment(uint32_t k,
                              double lambda,
                              uint32_t order,
                              double tol,
                              double *result);

// Limiting out-of-sample risk `r(δ², c, t)`; `delta2` may be `INFINITY`.
//
// # Safety
// `result` must be null or valid for writes.
enum ShrStatus shr_r_limit(double delta2, double c, double t, double *result);

// Worst-direction limit `R(δ², c, t)`.
//
// # Safety
// `result` must be null or valid for writes.
enum ShrStatus shr_big_r_limit(double delta2, double c, double t, double *result);

// `sup_δ² R(δ², c, t)` and its maximizer (`INFINITY` if approached at ∞).
//
// # Safety
// `value` and `argmax` must be null or valid for writes.
enum ShrStatus shr_sup_big_r(double c, double t, double *value, double *argmax);

// Worst-case phase classification at `(c, t)`.
//
// # Safety
// `verdict` must be null or valid for writes.
enum ShrStatus shr_phase_classify(double c, double t, struct ShrPhaseVerdict *verdict);

// Closed form and quadrature of the Marchenko–Pastur integral identity.
// `quadrature` receives NaN at `t = 1`, where the closed form is infinite.
//
// # Safety
// `closed` and `quadrature` must be null or valid for writes.
enum ShrStatus shr_edge_integral(double t, double *closed, double *quadrature);

// Samples `X = VΣ^{1/2}` with standard normal `V`. `sigma` is a row-major
// `p × p` covariance, or null for the identity.
//
// # Safety
// `sigma` must be null or point to `p·p` doubles; `handle` must be valid for
// writes.
enum ShrStatus shr_design_sample(size_t n,
                                 size_t p,
                                 const double *sigma,
                                 uint64_t seed,
                                 struct ShrDesign **handle);

// Builds `X = VΣ^{1/2}` from a row-major `n × p` matrix `V`.
//
// # Safety
// `v` must point to `n·p` doubles, `sigma` be null or point to `p·p`
// doubles, and `handle` be valid for writes.
enum ShrStatus shr_design_from_v(const double *v,
                                 size_t n,
                                 size_t p,
                                 const double *sigma,
                                 struct ShrDesign **handle);

// Releases a handle; null is a no-op.
//
// # Safety
// `handle` must come from this library and not be used afterwards.
void shr_design_free(struct ShrDesign *handle);

// Writes the eigenvalues of `X′X/n` in ascending order into `values`, which
// must hold `p` entries.
//
// # Safety
// `handle` must be a live handle and `values` point to `len` writable doubles.
enum ShrStatus shr_design_spectrum(const struct ShrDesign *handle, double *values, size_t len);

// Exact in- and out-of-sample risks of the shrinkage estimator with tuning
// `c` and of maximum likelihood, for the coefficient vector `beta` (`p`
// entries).
//
// # Safety
// `handle` must be a live handle, `beta` point to `p` doubles and `report`
// be valid for writes.
enum ShrStatus shr_design_risk(const struct ShrDesign *handle,
                               double c,
                               const double *beta,
                               size_t p,
                               struct ShrRiskReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHRINKRISK_H */
