//! C ABI over `so3sr`.
//!
//! Kernels and certificates are opaque heap handles created by `*_new` and
//! released by `*_free`. Every fallible call returns an `int32_t` status
//! (`SO3SR_OK` or a negative code) and writes results through out-pointers.
//! Rotations cross the boundary as unit quaternions `[w, x, y, z]`.
//! The message for the last failure on the calling thread is available from
//! `so3sr_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use so3sr::certificate::{solve_certificate, verify_certificate, Certificate, VerifyOptions};
use so3sr::filter::FilterSpec;
use so3sr::kernel::ZonalKernel;
use so3sr::so3::{Rotation, SupportSet};
use so3sr::Error;

pub const SO3SR_OK: i32 = 0;
/// a required pointer was null
pub const SO3SR_ERR_NULL: i32 = -1;
/// argument outside the mathematical hypotheses
pub const SO3SR_ERR_DOMAIN: i32 = -2;
pub const SO3SR_ERR_CAPABILITY: i32 = -3;
/// random support sampling gave up
pub const SO3SR_ERR_SATURATION: i32 = -4;
/// interpolation matrix numerically singular
pub const SO3SR_ERR_SINGULAR: i32 = -5;
/// an internal consistency check failed
pub const SO3SR_ERR_CONSISTENCY: i32 = -6;
pub const SO3SR_ERR_INTERNAL: i32 = -7;
pub const SO3SR_ERR_PANIC: i32 = -8;

/// Quaternions must have unit norm to this tolerance.
const QUAT_TOL: f64 = 1e-6;

/// Localized zonal kernel for a fixed `(s, N)`.
pub struct So3srKernel {
    inner: Arc<ZonalKernel>,
}

/// Solved interpolation certificate.
pub struct So3srCertificate {
    inner: Certificate,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Usage(_) => SO3SR_ERR_DOMAIN,
            Error::Capability(_) => SO3SR_ERR_CAPABILITY,
            Error::Saturation { .. } => SO3SR_ERR_SATURATION,
            Error::Singular { .. } => SO3SR_ERR_SINGULAR,
            Error::Consistency(_) => SO3SR_ERR_CONSISTENCY,
            _ => SO3SR_ERR_INTERNAL,
        };
        Fail(code, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SO3SR_ERR_NULL, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SO3SR_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside so3sr".into());
            SO3SR_ERR_PANIC
        }
    }
}

unsafe fn rotation(q: *const f64, what: &str) -> Result<Rotation, Fail> {
    if q.is_null() {
        return Err(null(what));
    }
    let q = std::slice::from_raw_parts(q, 4);
    quaternion(q, what)
}

fn quaternion(q: &[f64], what: &str) -> Result<Rotation, Fail> {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !n.is_finite() || (n - 1.0).abs() > QUAT_TOL {
        return Err(Fail(SO3SR_ERR_DOMAIN, format!("{what} is not a unit quaternion (norm {n})")));
    }
    Ok(Rotation::from_quaternion([q[0], q[1], q[2], q[3]]))
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns its full length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn so3sr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let k = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, k);
            *buf.add(k) = 0;
        }
        msg.len()
    })
}

/// Builds the kernel for even `s` in [6, 16] and `n >= 2s`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by
/// the caller.
#[no_mangle]
pub unsafe extern "C" fn so3sr_kernel_new(s: u32, n: u32, out: *mut *mut So3srKernel) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = FilterSpec::new(s as usize, n as usize)?;
        let k = Box::new(So3srKernel {
            inner: Arc::new(ZonalKernel::new(spec)),
        });
        *out = Box::into_raw(k);
        Ok(())
    })
}

/// # Safety
/// `k` must be null or a handle from `so3sr_kernel_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so3sr_kernel_free(k: *mut So3srKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Polynomial degree `N` of the kernel.
///
/// # Safety
/// `k` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn so3sr_kernel_degree(k: *const So3srKernel, out: *mut u32) -> i32 {
    guard(|| {
        let (k, out) = (k.as_ref().ok_or_else(|| null("kernel"))?, out.as_mut().ok_or_else(|| null("out"))?);
        *out = k.inner.degree() as u32;
        Ok(())
    })
}

/// `σ_N(x, y)` for unit quaternions `x`, `y`.
///
/// # Safety
/// `k` must be a live handle, `x` and `y` must point to 4 doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn so3sr_kernel_sigma(k: *const So3srKernel, x: *const f64, y: *const f64, out: *mut f64) -> i32 {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (x, y) = (rotation(x, "x")?, rotation(y, "y")?);
        *out = k.inner.sigma(&x, &y);
        Ok(())
    })
}

/// Derivative of order `order` in [0, 3] of the zonal profile at angle `t`.
///
/// # Safety
/// `k` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn so3sr_kernel_profile(k: *const So3srKernel, t: f64, order: u32, out: *mut f64) -> i32 {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = k.inner.sigma_tilde(t, order as usize)?;
        Ok(())
    })
}

/// Named filter constant (for example `"c_s"` or `"C_2_s"`).
///
/// # Safety
/// `k` must be a live handle, `name` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn so3sr_kernel_constant(k: *const So3srKernel, name: *const c_char, out: *mut f64) -> i32 {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail(SO3SR_ERR_DOMAIN, "name is not UTF-8".into()))?;
        let table = k.inner.spec().constant_table();
        let v = table
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Fail(SO3SR_ERR_DOMAIN, format!("unknown constant {name:?}")))?;
        *out = v.1;
        Ok(())
    })
}

/// Solves the interpolation system for `m` centers (`4m` quaternion
/// components) and signs in {-1, +1}.
///
/// # Safety
/// `k` must be a live handle, `centers` must point to `4*m` doubles, `signs`
/// to `m` bytes, and `out` must be valid. The handle written to `out` is
/// owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn so3sr_certificate_new(
    k: *const So3srKernel,
    centers: *const f64,
    signs: *const i8,
    m: usize,
    out: *mut *mut So3srCertificate,
) -> i32 {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        if centers.is_null() || signs.is_null() {
            return Err(null("centers or signs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if m == 0 {
            return Err(Fail(SO3SR_ERR_DOMAIN, "m must be positive".into()));
        }
        let raw = std::slice::from_raw_parts(centers, 4 * m);
        let pts = raw
            .chunks_exact(4)
            .enumerate()
            .map(|(i, q)| quaternion(q, &format!("center {i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let signs: Vec<f64> = std::slice::from_raw_parts(signs, m).iter().map(|v| *v as f64).collect();
        let support = SupportSet::new(pts)?;
        let cert = solve_certificate(&support, &signs, &k.inner)?;
        *out = Box::into_raw(Box::new(So3srCertificate { inner: cert }));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from `so3sr_certificate_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so3sr_certificate_free(c: *mut So3srCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// `q(x)` and, if `grad` is non-null, its right-invariant gradient (3 doubles).
///
/// # Safety
/// `c` must be a live handle, `x` must point to 4 doubles, `value` to one and
/// `grad` must be null or point to 3.
#[no_mangle]
pub unsafe extern "C" fn so3sr_certificate_eval(c: *const So3srCertificate, x: *const f64, value: *mut f64, grad: *mut f64) -> i32 {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("certificate"))?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        let x = rotation(x, "x")?;
        if grad.is_null() {
            *value = c.inner.eval_q(&x);
        } else {
            let j = c.inner.eval_jet(&x);
            *value = j.value;
            std::slice::from_raw_parts_mut(grad, 3).copy_from_slice(j.gradient.as_slice());
        }
        Ok(())
    })
}

/// 1-norm condition number of the interpolation matrix.
///
/// # Safety
/// `c` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn so3sr_certificate_condition(c: *const So3srCertificate, out: *mut f64) -> i32 {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("certificate"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = c.inner.condition;
        Ok(())
    })
}

/// Near/far verification with the default meshes. Writes the far-region
/// maximum of `|q|` and 1 or 0 for the overall pass flag.
///
/// # Safety
/// `c`, `far_max` and `pass` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn so3sr_certificate_verify(
    c: *const So3srCertificate,
    far_samples: u32,
    seed: u64,
    far_max: *mut f64,
    pass: *mut i32,
) -> i32 {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("certificate"))?;
        let far_max = far_max.as_mut().ok_or_else(|| null("far_max"))?;
        let pass = pass.as_mut().ok_or_else(|| null("pass"))?;
        let opts = VerifyOptions {
            far_samples: far_samples as usize,
            seed,
            ..Default::default()
        };
        let r = verify_certificate(&c.inner, &opts)?;
        *far_max = r.far_max;
        *pass = r.pass as i32;
        Ok(())
    })
}
