#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use so3sr::kernel::{ThirdPattern, ZonalKernel};
use so3sr::so3::{levi_civita, numeric_x, third_index, Rotation};

pub const STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// log-log slope of the error across `STEPS`.
pub fn slope(errs: &[f64; 3]) -> f64 {
    (errs[0] / errs[2]).log10() / 2.0
}

/// Central difference in `y` along `X_k`.
pub fn numeric_y<F: Fn(&Rotation) -> f64>(f: F, y: &Rotation, k: usize, h: f64) -> f64 {
    numeric_x(f, y, k, h)
}

/// Finite-difference versions of each derivative kernel, each taken as one
/// central difference of the analytic kernel one order lower.
pub struct FdFamilies {
    pub grad_y: Vector3<f64>,
    pub grad_x: Vector3<f64>,
    pub mixed: Matrix3<f64>,
    pub xx: Matrix3<f64>,
    pub third: Vec<(ThirdPattern, f64)>,
}

pub fn fd_families(k: &ZonalKernel, x: &Rotation, y: &Rotation, h: f64) -> FdFamilies {
    let grad_y = Vector3::from_fn(|n, _| numeric_y(|yy| k.sigma(x, yy), y, n, h));
    let grad_x = Vector3::from_fn(|n, _| numeric_x(|xx| k.sigma(xx, y), x, n, h));
    let mixed = Matrix3::from_fn(|i, n| numeric_x(|xx| k.grad_y_sigma(xx, y)[n], x, i, h));
    let xx = Matrix3::from_fn(|j, i| numeric_x(|xx| k.grad_x_sigma(xx, y)[i], x, j, h));
    let third = ThirdPattern::all()
        .into_iter()
        .map(|p| (p, fd_third(k, x, y, p, h)))
        .collect();
    FdFamilies { grad_y, grad_x, mixed, xx, third }
}

/// `X_j X_i X_k^y σ` from the analytic mixed kernel, with the Hessian
/// correction `X_n^x X_k^y σ` also by central differences.
pub fn fd_third(k: &ZonalKernel, x: &Rotation, y: &Rotation, p: ThirdPattern, h: f64) -> f64 {
    let base = |j: usize, i: usize, kk: usize| {
        numeric_x(|xx| k.mixed_sigma(xx, y, i, kk).unwrap(), x, j, h)
    };
    let corr = |j: usize, i: usize, kk: usize| {
        let n = third_index(j, i);
        0.5 * levi_civita(j, i, n) * numeric_x(|xx| k.grad_y_sigma(xx, y)[kk], x, n, h)
    };
    match p {
        ThirdPattern::IIK { i, k: kk } => base(i, i, kk),
        ThirdPattern::III { i } => base(i, i, i),
        ThirdPattern::HessN { j, i } => {
            let n = third_index(j, i);
            base(j, i, n) - corr(j, i, n)
        }
        ThirdPattern::HessI { j, i } => base(j, i, i) - corr(j, i, i),
        ThirdPattern::HessJ { j, i } => base(j, i, j) - corr(j, i, j),
    }
}

/// Max abs component error of each family: `[grad_y, grad_x, mixed, xx, IIK, III, HessN, HessI, HessJ]`.
pub fn family_errors(k: &ZonalKernel, x: &Rotation, y: &Rotation, h: f64) -> [f64; 9] {
    let d = k.derivs(x, y);
    let fd = fd_families(k, x, y, h);
    let mut e = [0.0f64; 9];
    e[0] = (fd.grad_y - d.gy).amax();
    e[1] = (fd.grad_x - d.gx).amax();
    e[2] = (fd.mixed - d.xy).amax();
    e[3] = (fd.xx - d.xx).amax();
    for (p, v) in fd.third {
        let a = k.third_sigma_terms(x, y, p).unwrap();
        let slot = match p {
            ThirdPattern::IIK { .. } => 4,
            ThirdPattern::III { .. } => 5,
            ThirdPattern::HessN { .. } => 6,
            ThirdPattern::HessI { .. } => 7,
            ThirdPattern::HessJ { .. } => 8,
        };
        e[slot] = e[slot].max((a - v).abs());
    }
    e
}

pub const FAMILY_NAMES: [&str; 9] =
    ["grad_y", "grad_x", "mixed", "xx", "iik", "iii", "hess_n", "hess_i", "hess_j"];
