//! Hermite interpolation system `Kα = (u, 0, 0, 0)`, its dense solution and
//! the bound checks around it.
//!
//! Layout: row `r·M + i`, column `c·M + j` holds `A_r^x B_c^y σ_N(x_i, x_j)`
//! where `A_0 = B_0 = id` and `A_r = X_r^x`, `B_c = X_c^y` for r, c ≥ 1.
//! Row blocks are the interpolation conditions, column blocks the
//! coefficient blocks `α_0..α_3`. K is symmetric.

pub mod verify;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::filter::feasibility;
use crate::kernel::{ExpansionJet, KernelExpansion, ZonalKernel};
use crate::so3::{Rotation, SupportSet};

pub use verify::{
    enumerate_sign_patterns, verify_certificate, BandSummary, NearCenterSummary, PatternResult,
    PatternSummary, VerificationReport, VerifyOptions,
};

/// Condition estimate above which the system counts as singular.
pub const MAX_CONDITION: f64 = 1e14;
/// `‖Kα − rhs‖_∞ / ‖rhs‖_∞` accepted from the dense solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
pub const INTERPOLATION_TOL: f64 = 1e-8;
pub const DEFAULT_B: f64 = 28.0;
pub const DEFAULT_NU: f64 = 36.0;

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct InterpolationSystem {
    pub centers: SupportSet,
    pub kernel: Arc<ZonalKernel>,
    pub matrix: DMatrix<f64>,
    /// `σ̃_N''(0)`, negative
    pub sigma2_zero: f64,
}

impl InterpolationSystem {
    /// Assembles K; needs `ρ(C) ≥ π/(N+1)`.
    pub fn assemble(centers: &SupportSet, kernel: &Arc<ZonalKernel>) -> Result<Self> {
        let np1 = (kernel.degree() + 1) as f64;
        if centers.separation < PI / np1 {
            return domain(format!(
                "separation {:.4e} below pi/(N+1) = {:.4e}",
                centers.separation,
                PI / np1
            ));
        }
        let m = centers.len();
        let s2 = kernel.sigma_tilde(0.0, 2)?;
        let mut k = DMatrix::zeros(4 * m, 4 * m);
        for i in 0..m {
            // coincidence limits, exact
            k[(i, i)] = 1.0;
            for r in 1..4 {
                k[(r * m + i, r * m + i)] = -s2;
            }
            for j in (i + 1)..m {
                let d = kernel.derivs(&centers.points[i], &centers.points[j]);
                for r in 0..4 {
                    for c in 0..4 {
                        let v = match (r, c) {
                            (0, 0) => d.val,
                            (0, c) => d.gy[c - 1],
                            (r, 0) => d.gx[r - 1],
                            (r, c) => d.xy[(r - 1, c - 1)],
                        };
                        // block(c, r) at (j, i) is the same derivative with x and y swapped
                        k[(r * m + i, c * m + j)] = v;
                        k[(c * m + j, r * m + i)] = v;
                    }
                }
            }
        }
        Ok(InterpolationSystem {
            centers: centers.clone(),
            kernel: kernel.clone(),
            matrix: k,
            sigma2_zero: s2,
        })
    }

    pub fn m(&self) -> usize {
        self.centers.len()
    }

    pub fn block(&self, r: usize, c: usize) -> DMatrix<f64> {
        let m = self.m();
        self.matrix.view((r * m, c * m), (m, m)).into_owned()
    }

    pub fn rhs(&self, signs: &[f64]) -> Result<DVector<f64>> {
        let m = self.m();
        if signs.len() != m {
            return domain(format!("{} signs for {m} centers", signs.len()));
        }
        if let Some(u) = signs.iter().find(|u| u.abs() != 1.0) {
            return domain(format!("sign {u} is not +-1"));
        }
        let mut b = DVector::zeros(4 * m);
        b.rows_mut(0, m).copy_from_slice(signs);
        Ok(b)
    }

    /// LU factorization with a 1-norm condition estimate.
    pub fn factor(&self) -> Result<FactoredSystem> {
        let lu = self.matrix.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or(Error::Singular { condition: f64::INFINITY })?;
        let condition = one_norm(&self.matrix) * one_norm(&inv);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::Singular { condition });
        }
        Ok(FactoredSystem {
            system: self.clone(),
            inverse: inv,
            lu,
            condition,
        })
    }

    pub fn solve(&self, signs: &[f64]) -> Result<Certificate> {
        self.factor()?.solve(signs)
    }
}

#[derive(Clone, Debug)]
pub struct FactoredSystem {
    pub system: InterpolationSystem,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub inverse: DMatrix<f64>,
    pub condition: f64,
}

impl FactoredSystem {
    pub fn solve(&self, signs: &[f64]) -> Result<Certificate> {
        let b = self.system.rhs(signs)?;
        let x = self
            .lu
            .solve(&b)
            .ok_or(Error::Singular { condition: self.condition })?;
        let residual = (&self.system.matrix * &x - &b).amax();
        if residual > SOLVE_RESIDUAL_TOL * b.amax() {
            return Err(Error::Consistency(format!(
                "dense solve residual {residual:.3e} above tolerance"
            )));
        }
        Ok(Certificate::from_solution(&self.system, signs.to_vec(), &x, residual, self.condition))
    }
}

/// Splits a stacked `(α_0, α_1, α_2, α_3)` vector into per-center blocks.
pub(crate) fn split_alpha(x: &DVector<f64>, m: usize) -> (Vec<f64>, Vec<Vector3<f64>>) {
    let a0 = x.rows(0, m).iter().copied().collect();
    let a = (0..m).map(|j| Vector3::new(x[m + j], x[2 * m + j], x[3 * m + j])).collect();
    (a0, a)
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub centers: SupportSet,
    pub signs: Vec<f64>,
    pub expansion: KernelExpansion,
    pub kernel: Arc<ZonalKernel>,
    /// `‖Kα − rhs‖_∞`
    pub residual: f64,
    pub condition: f64,
}

impl Certificate {
    fn from_solution(
        sys: &InterpolationSystem,
        signs: Vec<f64>,
        x: &DVector<f64>,
        residual: f64,
        condition: f64,
    ) -> Self {
        let (a0, a) = split_alpha(x, sys.m());
        Certificate {
            centers: sys.centers.clone(),
            signs,
            expansion: KernelExpansion {
                centers: sys.centers.points.clone(),
                alpha0: a0,
                alpha: a,
            },
            kernel: sys.kernel.clone(),
            residual,
            condition,
        }
    }

    pub fn alpha0(&self) -> &[f64] {
        &self.expansion.alpha0
    }

    /// `α_{k+1}` for k = 0..2, each an M-vector.
    pub fn alpha_blocks(&self) -> [Vec<f64>; 4] {
        let a = &self.expansion.alpha;
        [
            self.expansion.alpha0.clone(),
            a.iter().map(|v| v[0]).collect(),
            a.iter().map(|v| v[1]).collect(),
            a.iter().map(|v| v[2]).collect(),
        ]
    }

    pub fn eval_q(&self, x: &Rotation) -> f64 {
        self.kernel.expansion_value(&self.expansion, x)
    }

    pub fn eval_grad_q(&self, x: &Rotation) -> Vector3<f64> {
        self.kernel.expansion_jet(&self.expansion, x).gradient
    }

    pub fn eval_jet(&self, x: &Rotation) -> ExpansionJet {
        self.kernel.expansion_jet(&self.expansion, x)
    }

    /// `(max_i |q(x_i) − u_i|, max_i ‖∇q(x_i)‖_∞)` by direct re-evaluation.
    pub fn interpolation_residual(&self) -> (f64, f64) {
        let mut out = (0.0f64, 0.0f64);
        for (x, u) in self.centers.points.iter().zip(&self.signs) {
            let j = self.eval_jet(x);
            out.0 = out.0.max((j.value - u).abs());
            out.1 = out.1.max(j.gradient.amax());
        }
        out
    }

    pub fn coefficient_check(&self, b: f64) -> CoefficientCheck {
        coefficient_check(
            &self.expansion.alpha0,
            &self.expansion.alpha,
            &self.signs,
            self.kernel.spec().constants.c_s,
            self.kernel.degree(),
            b,
        )
    }
}

pub fn solve_certificate(
    centers: &SupportSet,
    signs: &[f64],
    kernel: &Arc<ZonalKernel>,
) -> Result<Certificate> {
    InterpolationSystem::assemble(centers, kernel)?.solve(signs)
}

/// Coefficient bounds with `c_s` and `b`: `‖α_0‖_∞ ≤ 1 + c_s/(4(b−3)−c_s)`,
/// `‖α_j‖_∞ ≤ 2/((4(b−3)−c_s)(N+1))` and `u_i α_{0,i} ≥ 1 − c_s/(4(b−3)−c_s)`.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientCheck {
    pub alpha0_max: f64,
    pub alpha0_bound: f64,
    pub alpha_max: f64,
    pub alpha_bound: f64,
    /// `min_i u_i α_{0,i}`; the lower bound is stated for `u_i = 1` and holds for `−1` by symmetry.
    pub anchor_min: f64,
    pub anchor_bound: f64,
    pub holds: bool,
}

pub(crate) fn coefficient_check(
    alpha0: &[f64],
    alpha: &[Vector3<f64>],
    signs: &[f64],
    c_s: f64,
    n: usize,
    b: f64,
) -> CoefficientCheck {
    let den = 4.0 * (b - 3.0) - c_s;
    let alpha0_max = alpha0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let alpha_max = (0..3)
        .map(|k| alpha.iter().fold(0.0f64, |m, v| m.max(v[k].abs())))
        .fold(0.0, f64::max);
    let anchor_min = alpha0.iter().zip(signs).map(|(a, u)| a * u).fold(f64::INFINITY, f64::min);
    let alpha0_bound = 1.0 + c_s / den;
    let alpha_bound = 2.0 / (den * (n + 1) as f64);
    let anchor_bound = 1.0 - c_s / den;
    CoefficientCheck {
        alpha0_max,
        alpha0_bound,
        alpha_max,
        alpha_bound,
        anchor_min,
        anchor_bound,
        holds: alpha0_max <= alpha0_bound && alpha_max <= alpha_bound && anchor_min >= anchor_bound,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

fn check(name: &str, measured: f64, bound: f64) -> BoundCheck {
    BoundCheck {
        name: name.to_string(),
        measured,
        bound,
        holds: measured <= bound,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurReport {
    pub m: usize,
    pub nu: f64,
    pub b: f64,
    pub separation: f64,
    pub condition: f64,
    /// block norms against their bounds
    pub blocks: Vec<BoundCheck>,
    /// `a_1..a_4`
    pub cascade: [f64; 4],
    pub cascade_below_one: bool,
    /// Schur complements against `a_1..a_4`
    pub schur: Vec<BoundCheck>,
    /// `(ν^s, b·C_{2,s}/c_s)`
    pub feasibility: (f64, f64),
    pub feasible: bool,
    pub all_hold: bool,
}

fn schur(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dinv_c = d
        .clone()
        .lu()
        .solve(c)
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    Ok(a - b * dinv_c)
}

fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or(Error::Singular { condition: f64::INFINITY })
}

/// Block norms of K against their off-diagonal bounds and the nested Schur
/// complements `σ_33`, `T = σ_22 − σ_23σ_33⁻¹σ_32`, `S = K_2/K_22` and
/// `R = K/K_2` against the cascade `a_1..a_4`.
pub fn check_schur_bounds(system: &InterpolationSystem, nu: f64, b: f64) -> Result<SchurReport> {
    let spec = system.kernel.spec();
    let np1 = (spec.n + 1) as f64;
    if system.centers.separation < nu / np1 {
        return domain(format!(
            "separation {:.4e} below nu/(N+1) = {:.4e}",
            system.centers.separation,
            nu / np1
        ));
    }
    let c = &spec.constants;
    let nus = nu.powi(spec.s as i32);
    let (c0, c1, c2) = (c.c_off[0], c.c_off[1], c.c_off[2]);
    let m = system.m();
    let lam = -system.sigma2_zero;
    let id = DMatrix::<f64>::identity(m, m);
    let mut blocks = Vec::new();
    let s00 = system.block(0, 0);
    blocks.push(check("id_minus_s00", inf_norm(&(&id - &s00)), c0 / nus));
    for i in 1..4 {
        blocks.push(check(&format!("s0{i}"), inf_norm(&system.block(0, i)), c1 * np1 / nus));
        blocks.push(check(&format!("s{i}0"), inf_norm(&system.block(i, 0)), c1 * np1 / nus));
    }
    let c2b = c2 * np1 * np1 / nus;
    for i in 1..4 {
        for j in 1..4 {
            if i == j {
                blocks.push(check(&format!("lam_minus_s{i}{i}"), inf_norm(&(&id * lam - system.block(i, i))), c2b));
            } else {
                blocks.push(check(&format!("s{i}{j}"), inf_norm(&system.block(i, j)), c2b));
            }
        }
    }
    let a1 = c2 / (c.c_s * nus);
    blocks.push(check("inv_s00", inf_norm(&inverse(&s00)?), 1.0 / (1.0 - c0 / nus)));
    for i in 1..4 {
        blocks.push(check(
            &format!("inv_s{i}{i}"),
            inf_norm(&inverse(&system.block(i, i))?),
            1.0 / (c.c_s * np1 * np1 * (1.0 - a1)),
        ));
    }
    blocks.push(check("lam_lower", c.c_s * np1 * np1, lam));

    let a2 = a1 / (1.0 - a1);
    let a3 = a1 / (1.0 - 2.0 * a1);
    let a4 = c0 / nus + (c1 / nus).powi(2) * 3.0 / (c.c_s * (1.0 - 3.0 * a1));
    let cascade = [a1, a2, a3, a4];

    let k = &system.matrix;
    let sub = |r0: usize, c0: usize, nr: usize, nc: usize| k.view((r0 * m, c0 * m), (nr * m, nc * m)).into_owned();
    let s33 = sub(3, 3, 1, 1);
    let t = schur(&sub(2, 2, 1, 1), &sub(2, 3, 1, 1), &sub(3, 2, 1, 1), &s33)?;
    let s = schur(&sub(1, 1, 1, 1), &sub(1, 2, 1, 2), &sub(2, 1, 2, 1), &sub(2, 2, 2, 2))?;
    let r = schur(&sub(0, 0, 1, 1), &sub(0, 1, 1, 3), &sub(1, 0, 3, 1), &sub(1, 1, 3, 3))?;
    let schur_checks = vec![
        check("a1_s33", inf_norm(&(&id - &s33 / lam)), a1),
        check("a2_t", inf_norm(&(&id - &t / lam)), a2),
        check("a3_s", inf_norm(&(&id - &s / lam)), a3),
        check("a4_r", inf_norm(&(&id - &r)), a4),
    ];
    let feas = feasibility(spec.s, nu, b)?;
    let condition = system.factor().map(|f| f.condition).unwrap_or(f64::INFINITY);
    let cascade_below_one = cascade.iter().all(|a| *a < 1.0 && *a >= 0.0) && 3.0 * a1 < 1.0;
    let feasible = feas.0 > feas.1;
    let all_hold = blocks.iter().chain(&schur_checks).all(|c| c.holds) && cascade_below_one && feasible;
    Ok(SchurReport {
        m,
        nu,
        b,
        separation: system.centers.separation,
        condition,
        blocks,
        cascade,
        cascade_below_one,
        schur: schur_checks,
        feasibility: feas,
        feasible,
        all_hold,
    })
}
