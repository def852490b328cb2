#ifndef SO3SR_H
#define SO3SR_H

#include <stddef.h>
#include <stdint.h>

#define SO3SR_OK 0

// a required pointer was null
#define SO3SR_ERR_NULL -1

// argument outside the mathematical hypotheses
#define SO3SR_ERR_DOMAIN -2

#define SO3SR_ERR_CAPABILITY -3

// random support sampling gave up
#define SO3SR_ERR_SATURATION -4

// interpolation matrix numerically singular
#define SO3SR_ERR_SINGULAR -5

// an internal consistency check failed
#define SO3SR_ERR_CONSISTENCY -6

#define SO3SR_ERR_INTERNAL -7

#define SO3SR_ERR_PANIC -8

// Solved interpolation certificate.
typedef struct So3srCertificate So3srCertificate;

// Localized zonal kernel for a fixed `(s, N)`.
typedef struct So3srKernel So3srKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message on this thread into `buf` (NUL-terminated,
// truncated to `len`) and returns its full length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t so3sr_last_error(char *buf, size_t len);

// Builds the kernel for even `s` in [6, 16] and `n >= 2s`.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle owned by
// the caller.
int32_t so3sr_kernel_new(uint32_t s, uint32_t n, struct So3srKernel **out);

// # Safety
// `k` must be null or a handle from `so3sr_kernel_new` not yet freed.
void so3sr_kernel_free(struct So3srKernel *k);

// Polynomial degree `N` of the kernel.
//
// # Safety
// `k` and `out` must be valid pointers.
int32_t so3sr_kernel_degree(const struct So3srKernel *k, uint32_t *out);

// `σ_N(x, y)` for unit quaternions `x`, `y`.
//
// # Safety
// `k` must be a live handle, `x` and `y` must point to 4 doubles, `out` to one.
int32_t so3sr_kernel_sigma(const struct So3srKernel *k,
                           const double *x,
                           const double *y,
                           double *out);

// Derivative of order `order` in [0, 3] of the zonal profile at angle `t`.
//
// # Safety
// `k` must be a live handle and `out` a valid pointer.
int32_t so3sr_kernel_profile(const struct So3srKernel *k, double t, uint32_t order, double *out);

// Named filter constant (for example `"c_s"` or `"C_2_s"`).
//
// # Safety
// `k` must be a live handle, `name` a NUL-terminated string, `out` valid.
int32_t so3sr_kernel_constant(const struct So3srKernel *k, const char *name, double *out);

// Solves the interpolation system for `m` centers (`4m` quaternion
// components) and signs in {-1, +1}.
//
// # Safety
// `k` must be a live handle, `centers` must point to `4*m` doubles, `signs`
// to `m` bytes, and `out` must be valid. The handle written to `out` is
// owned by the caller.
int32_t so3sr_certificate_new(const struct So3srKernel *k,
                              const double *centers,
                              const int8_t *signs,
                              size_t m,
                              struct So3srCertificate **out);

// # Safety
// `c` must be null or a handle from `so3sr_certificate_new` not yet freed.
void so3sr_certificate_free(struct So3srCertificate *c);

// `q(x)` and, if `grad` is non-null, its right-invariant gradient (3 doubles).
//
// # Safety
// `c` must be a live handle, `x` must point to 4 doubles, `value` to one and
// `grad` must be null or point to 3.
int32_t so3sr_certificate_eval(const struct So3srCertificate *c,
                               const double *x,
                               double *value,
                               double *grad);

// 1-norm condition number of the interpolation matrix.
//
// # Safety
// `c` and `out` must be valid pointers.
int32_t so3sr_certificate_condition(const struct So3srCertificate *c, double *out);

// Near/far verification with the default meshes. Writes the far-region
// maximum of `|q|` and 1 or 0 for the overall pass flag.
//
// # Safety
// `c`, `far_max` and `pass` must be valid pointers.
int32_t so3sr_certificate_verify(const struct So3srCertificate *c,
                                 uint32_t far_samples,
                                 uint64_t seed,
                                 double *far_max,
                                 int32_t *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SO3SR_H */
