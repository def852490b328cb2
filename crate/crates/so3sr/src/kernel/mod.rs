//! The zonal kernel `σ_N(x, y) = σ̃_N(ω(y⁻¹x))` and its analytic derivative
//! kernels up to order three.
//!
//! Two evaluation routes. For `ω ≥ SMALL_OMEGA` the axis-angle jet is used:
//! derivatives of `σ̃_N` times derivatives of the rotation axis `e(y⁻¹x)`.
//! Below it the kernel is treated as a polynomial `ψ(cos ω)` in the trace and
//! differentiated through `cos ω = (tr(y⁻¹x) − 1)/2`, which has no singular
//! factors at `ω = 0`.

pub mod verify;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::so3::{axis_angle_of_matrix, generator, levi_civita, third_index, Rotation};

pub use verify::{
    verify_localization, verify_offdiag_sums, LocalizationOptions, LocalizationRow, OffdiagRow,
};

/// Switch between the trace route and the axis-angle jet.
pub const SMALL_OMEGA: f64 = 1e-2;

/// Signed `±e_j/2` term of `X_i^x e_n`: `Some((j, ε_{inj}))` for `i ≠ n`.
///
/// The full table is `X_i^x e_n = κ(δ_{in} − e_i e_n) + ½ ε_{inj} e_j` with
/// `κ = (1 + cos ω)/(2 sin ω)`.
pub fn rotax(i: usize, n: usize) -> Option<(usize, f64)> {
    if i == n {
        None
    } else {
        let j = third_index(i, n);
        Some((j, levi_civita(i, n, j)))
    }
}

/// `σ̃_N` and its first three derivatives at `ω(y⁻¹x)`, plus the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelJet {
    pub omega: f64,
    pub axis: Vector3<f64>,
    pub st: [f64; 4],
}

/// All derivatives of `σ_N(x, y)` needed downstream.
///
/// `xx[(j, i)] = X_j^x X_i^x σ`, `xy[(i, n)] = X_i^x X_n^y σ` and
/// `xxy[k][(j, i)] = X_j^x X_i^x X_k^y σ`.
#[derive(Clone, Copy, Debug)]
pub struct KernelDerivs {
    pub val: f64,
    pub gx: Vector3<f64>,
    pub gy: Vector3<f64>,
    pub xx: Matrix3<f64>,
    pub xy: Matrix3<f64>,
    pub xxy: [Matrix3<f64>; 3],
}

impl KernelDerivs {
    /// Hessian of `σ_N(·, y)`: `X_jX_i σ − ½ Σ_n ε_{jin} X_n σ`.
    pub fn hessian(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|j, i| {
            self.xx[(j, i)] - 0.5 * (0..3).map(|n| levi_civita(j, i, n) * self.gx[n]).sum::<f64>()
        })
    }

    /// Hessian of `X_k^y σ_N(·, y)`.
    pub fn hessian_of_grad_y(&self, k: usize) -> Matrix3<f64> {
        Matrix3::from_fn(|j, i| {
            self.xxy[k][(j, i)]
                - 0.5 * (0..3).map(|n| levi_civita(j, i, n) * self.xy[(n, k)]).sum::<f64>()
        })
    }
}

/// The five third-derivative combinations. Axis indices are 0-based and
/// `n` denotes the index different from `j` and `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThirdPattern {
    /// `X_i^x X_i^x X_k^y σ`, `k ≠ i`
    IIK { i: usize, k: usize },
    /// `X_i^x X_i^x X_i^y σ`
    III { i: usize },
    /// `X_j^x X_i^x X_n^y σ − ½ε_{jin} X_n^x X_n^y σ`
    HessN { j: usize, i: usize },
    /// `X_j^x X_i^x X_i^y σ − ½ε_{jin} X_n^x X_i^y σ`
    HessI { j: usize, i: usize },
    /// `X_j^x X_i^x X_j^y σ − ½ε_{jin} X_n^x X_j^y σ`
    HessJ { j: usize, i: usize },
}

impl ThirdPattern {
    /// Every valid pattern.
    pub fn all() -> Vec<ThirdPattern> {
        let mut v = Vec::new();
        for i in 0..3 {
            v.push(ThirdPattern::III { i });
            for k in 0..3 {
                if k != i {
                    v.push(ThirdPattern::IIK { i, k });
                    v.push(ThirdPattern::HessN { j: k, i });
                    v.push(ThirdPattern::HessI { j: k, i });
                    v.push(ThirdPattern::HessJ { j: k, i });
                }
            }
        }
        v
    }

    fn check(&self) -> Result<()> {
        let (a, b) = match *self {
            ThirdPattern::III { i } => (i, (i + 1) % 3),
            ThirdPattern::IIK { i, k } => (i, k),
            ThirdPattern::HessN { j, i } | ThirdPattern::HessI { j, i } | ThirdPattern::HessJ { j, i } => {
                (j, i)
            }
        };
        if a > 2 || b > 2 || a == b {
            return Err(Error::Domain(format!("invalid third-derivative pattern {self:?}")));
        }
        Ok(())
    }
}

/// Point evaluations of `q(x) = Σ_j α_{0,j} σ(x, x_j) + Σ_{j,k} α_{k,j} X_k^y σ(x, x_j)`.
#[derive(Clone, Debug)]
pub struct KernelExpansion {
    pub centers: Vec<Rotation>,
    pub alpha0: Vec<f64>,
    /// `alpha[j][k] = α_{k,j}`
    pub alpha: Vec<Vector3<f64>>,
}

impl KernelExpansion {
    pub fn new(centers: Vec<Rotation>, alpha0: Vec<f64>, alpha: Vec<Vector3<f64>>) -> Result<Self> {
        if alpha0.len() != centers.len() || alpha.len() != centers.len() {
            return Err(Error::Domain(format!(
                "{} centers but {} / {} coefficient blocks",
                centers.len(),
                alpha0.len(),
                alpha.len()
            )));
        }
        Ok(KernelExpansion { centers, alpha0, alpha })
    }
}

/// Value, gradient and Hessian of a kernel expansion at one point.
#[derive(Clone, Copy, Debug)]
pub struct ExpansionJet {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

#[derive(Clone, Debug)]
pub struct ZonalKernel {
    spec: FilterSpec,
    /// `a_k = g̃(k/(2(N+1)))/‖g̃‖_{1,N}`, k = 0..N
    a: Vec<f64>,
    /// Chebyshev coefficients of `ψ, ψ', ψ'', ψ'''` with `σ̃_N(ω) = ψ(cos ω)`.
    cheb: [Vec<f64>; 4],
}

fn cheb_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + 2.0 * k as f64 * c[k];
    }
    d.truncate(n - 1);
    d[0] *= 0.5;
    d
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}

fn tr(m: &Matrix3<f64>) -> f64 {
    m.trace()
}

impl ZonalKernel {
    pub fn new(spec: FilterSpec) -> Self {
        let a: Vec<f64> = spec.samples.iter().map(|g| g / spec.discrete_norm).collect();
        let mut b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        b[0] = a[0];
        let d1 = cheb_derivative(&b);
        let d2 = cheb_derivative(&d1);
        let d3 = cheb_derivative(&d2);
        ZonalKernel { spec, a, cheb: [b, d1, d2, d3] }
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn degree(&self) -> usize {
        self.spec.n
    }

    /// Normalized cosine coefficients `a_0..a_N`.
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// `σ̃_N^{(order)}(t)` for `order ≤ 3`.
    pub fn sigma_tilde(&self, t: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::Capability(format!("kernel derivatives of order {order} > 3")));
        }
        Ok(self.sigma_tilde_all(t)[order])
    }

    /// `[σ̃_N, σ̃_N', σ̃_N'', σ̃_N''']` at `t`.
    pub fn sigma_tilde_all(&self, t: f64) -> [f64; 4] {
        let mut s = [self.a[0], 0.0, 0.0, 0.0];
        for (k, &ak) in self.a.iter().enumerate().skip(1) {
            let kf = k as f64;
            let (sn, cs) = (kf * t).sin_cos();
            s[0] += 2.0 * ak * cs;
            s[1] -= 2.0 * kf * ak * sn;
            s[2] -= 2.0 * kf * kf * ak * cs;
            s[3] += 2.0 * kf * kf * kf * ak * sn;
        }
        s
    }

    /// `ψ^{(order)}(c)` where `σ̃_N(ω) = ψ(cos ω)`.
    pub fn psi(&self, c: f64, order: usize) -> f64 {
        clenshaw(&self.cheb[order.min(3)], c)
    }

    pub fn jet(&self, x: &Rotation, y: &Rotation) -> KernelJet {
        let z = y.inverse() * *x;
        let aa = axis_angle_of_matrix(z.matrix());
        KernelJet { omega: aa.omega, axis: aa.e, st: self.sigma_tilde_all(aa.omega) }
    }

    pub fn sigma(&self, x: &Rotation, y: &Rotation) -> f64 {
        let z = y.inverse() * *x;
        let aa = axis_angle_of_matrix(z.matrix());
        if aa.omega < SMALL_OMEGA {
            self.psi(0.5 * (z.trace() - 1.0), 0)
        } else {
            self.sigma_tilde_all(aa.omega)[0]
        }
    }

    pub fn grad_y_sigma(&self, x: &Rotation, y: &Rotation) -> Vector3<f64> {
        self.derivs(x, y).gy
    }

    pub fn grad_x_sigma(&self, x: &Rotation, y: &Rotation) -> Vector3<f64> {
        self.derivs(x, y).gx
    }

    /// `X_i^x X_n^y σ_N(x, y)`.
    pub fn mixed_sigma(&self, x: &Rotation, y: &Rotation, i: usize, n: usize) -> Result<f64> {
        if i > 2 || n > 2 {
            return Err(Error::Domain(format!("axis index out of range: ({i}, {n})")));
        }
        Ok(self.derivs(x, y).xy[(i, n)])
    }

    pub fn third_sigma_terms(&self, x: &Rotation, y: &Rotation, pattern: ThirdPattern) -> Result<f64> {
        pattern.check()?;
        Ok(third_from(&self.derivs(x, y), pattern))
    }

    /// Hessian of `σ_N(·, y)` at `x`.
    pub fn hessian_sigma(&self, x: &Rotation, y: &Rotation) -> Matrix3<f64> {
        self.derivs(x, y).hessian()
    }

    /// Hessian of a kernel expansion at `x`.
    pub fn hessian_q_terms(&self, q: &KernelExpansion, x: &Rotation) -> Matrix3<f64> {
        self.expansion_jet(q, x).hessian
    }

    pub fn expansion_jet(&self, q: &KernelExpansion, x: &Rotation) -> ExpansionJet {
        let mut out = ExpansionJet { value: 0.0, gradient: Vector3::zeros(), hessian: Matrix3::zeros() };
        for ((c, &a0), a) in q.centers.iter().zip(&q.alpha0).zip(&q.alpha) {
            let d = self.derivs(x, c);
            out.value += a0 * d.val + a.dot(&d.gy);
            out.gradient += a0 * d.gx + d.xy * a;
            out.hessian += a0 * d.hessian();
            for k in 0..3 {
                if a[k] != 0.0 {
                    out.hessian += a[k] * d.hessian_of_grad_y(k);
                }
            }
        }
        out
    }

    /// Value of a kernel expansion at `x`.
    pub fn expansion_value(&self, q: &KernelExpansion, x: &Rotation) -> f64 {
        q.centers
            .iter()
            .zip(&q.alpha0)
            .zip(&q.alpha)
            .map(|((c, &a0), a)| {
                let d = self.derivs(x, c);
                a0 * d.val + a.dot(&d.gy)
            })
            .sum()
    }

    /// `(σ_N(x, y), X^y σ_N(x, y))` without the higher derivatives.
    pub fn value_grad_y(&self, x: &Rotation, y: &Rotation) -> (f64, Vector3<f64>) {
        let z = y.inverse() * *x;
        let aa = axis_angle_of_matrix(z.matrix());
        if aa.omega < SMALL_OMEGA {
            let zm = z.matrix();
            let c = 0.5 * (tr(zm) - 1.0);
            let p1 = self.psi(c, 1);
            let cy = Vector3::from_fn(|k, _| -0.5 * tr(&(generator(k) * zm)));
            (self.psi(c, 0), p1 * cy)
        } else {
            let (mut s0, mut s1) = (self.a[0], 0.0);
            for (k, &ak) in self.a.iter().enumerate().skip(1) {
                let (sn, cs) = (k as f64 * aa.omega).sin_cos();
                s0 += 2.0 * ak * cs;
                s1 -= 2.0 * k as f64 * ak * sn;
            }
            (s0, -s1 * aa.e)
        }
    }

    pub fn derivs(&self, x: &Rotation, y: &Rotation) -> KernelDerivs {
        let z = y.inverse() * *x;
        let aa = axis_angle_of_matrix(z.matrix());
        if aa.omega < SMALL_OMEGA {
            self.derivs_trace(z.matrix())
        } else {
            derivs_jet(aa.e, aa.omega, self.sigma_tilde_all(aa.omega))
        }
    }

    /// Trace route, also usable at any angle.
    pub fn derivs_trace(&self, z: &Matrix3<f64>) -> KernelDerivs {
        let c = 0.5 * (tr(z) - 1.0);
        let p = [self.psi(c, 0), self.psi(c, 1), self.psi(c, 2), self.psi(c, 3)];
        let l = [generator(0), generator(1), generator(2)];
        let cx = Vector3::from_fn(|j, _| 0.5 * tr(&(z * l[j])));
        let cy = Vector3::from_fn(|k, _| -0.5 * tr(&(l[k] * z)));
        let cxx = Matrix3::from_fn(|j, i| 0.5 * tr(&(z * l[j] * l[i])));
        let cxy = Matrix3::from_fn(|i, k| -0.5 * tr(&(l[k] * z * l[i])));
        let mut xxy = [Matrix3::zeros(); 3];
        for (k, m) in xxy.iter_mut().enumerate() {
            *m = Matrix3::from_fn(|j, i| {
                let cxxy = -0.5 * tr(&(l[k] * z * l[j] * l[i]));
                p[3] * cx[j] * cx[i] * cy[k]
                    + p[2] * (cxx[(j, i)] * cy[k] + cxy[(j, k)] * cx[i] + cxy[(i, k)] * cx[j])
                    + p[1] * cxxy
            });
        }
        KernelDerivs {
            val: p[0],
            gx: p[1] * cx,
            gy: p[1] * cy,
            xx: Matrix3::from_fn(|j, i| p[2] * cx[j] * cx[i] + p[1] * cxx[(j, i)]),
            xy: Matrix3::from_fn(|i, k| p[2] * cx[i] * cy[k] + p[1] * cxy[(i, k)]),
            xxy,
        }
    }

    /// Jet route at an explicit axis and angle `ω ∈ (0, π]`.
    pub fn derivs_axis_angle(&self, e: &Vector3<f64>, omega: f64) -> KernelDerivs {
        derivs_jet(*e, omega, self.sigma_tilde_all(omega))
    }
}

pub(crate) fn third_from(d: &KernelDerivs, pattern: ThirdPattern) -> f64 {
    match pattern {
        ThirdPattern::IIK { i, k } => d.xxy[k][(i, i)],
        ThirdPattern::III { i } => d.xxy[i][(i, i)],
        ThirdPattern::HessN { j, i } => d.hessian_of_grad_y(third_index(j, i))[(j, i)],
        ThirdPattern::HessI { j, i } => d.hessian_of_grad_y(i)[(j, i)],
        ThirdPattern::HessJ { j, i } => d.hessian_of_grad_y(j)[(j, i)],
    }
}

/// `E1[(i, n)] = X_i e_n`.
fn axis_first(e: &Vector3<f64>, kappa: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|i, n| {
        let delta = if i == n { 1.0 } else { 0.0 };
        let half = rotax(i, n).map_or(0.0, |(j, sg)| 0.5 * sg * e[j]);
        kappa * (delta - e[i] * e[n]) + half
    })
}

fn derivs_jet(e: Vector3<f64>, omega: f64, s: [f64; 4]) -> KernelDerivs {
    let half = 0.5 * omega;
    let kappa = 0.5 / half.tan();
    let dkappa = -0.25 / half.sin().powi(2);
    let e1 = axis_first(&e, kappa);
    // E2[j][(i, n)] = X_j X_i e_n
    let mut e2 = [Matrix3::zeros(); 3];
    for (j, m) in e2.iter_mut().enumerate() {
        *m = Matrix3::from_fn(|i, n| {
            let delta = if i == n { 1.0 } else { 0.0 };
            let h = rotax(i, n).map_or(0.0, |(q, sg)| 0.5 * sg * e1[(j, q)]);
            dkappa * e[j] * (delta - e[i] * e[n]) - kappa * (e1[(j, i)] * e[n] + e[i] * e1[(j, n)]) + h
        });
    }
    let mut xxy = [Matrix3::zeros(); 3];
    for (n, m) in xxy.iter_mut().enumerate() {
        *m = Matrix3::from_fn(|j, i| {
            -(s[3] * e[j] * e[i] * e[n]
                + s[2] * (e1[(j, i)] * e[n] + e[i] * e1[(j, n)] + e[j] * e1[(i, n)])
                + s[1] * e2[j][(i, n)])
        });
    }
    KernelDerivs {
        val: s[0],
        gx: s[1] * e,
        gy: -s[1] * e,
        xx: Matrix3::from_fn(|j, i| s[2] * e[j] * e[i] + s[1] * e1[(j, i)]),
        xy: Matrix3::from_fn(|i, n| -(s[2] * e[i] * e[n] + s[1] * e1[(i, n)])),
        xxy,
    }
}
