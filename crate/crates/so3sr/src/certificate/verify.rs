//! Grid verification of a certificate: Hessian definiteness and `u_m q > 0.9`
//! on balls of radius `π/(2(N+1))` around the centers, `|q| < 1 − margin`
//! everywhere else, and band maxima next to their reference ceilings.
//!
//! The mesh is evaluated once per basis of coefficient vectors. A single
//! certificate is one basis; sign-pattern enumeration evaluates the M unit
//! solutions `K⁻¹e_i` and combines them linearly per pattern.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{coefficient_check, split_alpha, Certificate, CoefficientCheck, FactoredSystem, DEFAULT_B};
use crate::error::{domain, Error, Result};
use crate::kernel::ZonalKernel;
use crate::rng::stream;
use crate::so3::{fibonacci_sphere, geodesic_distance, haar_sample, Rotation, SupportSet};

pub const NEAR_Q_FLOOR: f64 = 0.9;
pub const NEAR_Q_REFERENCE: f64 = 0.92;
pub const NEAR_DIAG_REFERENCE: f64 = -0.041;
pub const NEAR_OFFDIAG_REFERENCE: f64 = 0.01;
pub const BAND_SLACK: f64 = 0.01;
pub const SWEEP_AXES: usize = 64;
pub const SWEEP_STEP: f64 = 0.25;
pub const SWEEP_MAX_T: f64 = 22.0;
/// Largest M for which sign patterns are enumerated.
pub const MAX_PATTERN_M: usize = 20;

/// `t_0 = 2√(10·1.001/0.999)`, in units of `1/(N+1)`.
pub fn t0() -> f64 {
    2.0 * (10.0 * 1.001 / 0.999f64).sqrt()
}

/// Far-region bands `[lo, hi)` in `t = (N+1)·dist` with their reference ceilings.
pub fn bands() -> [(&'static str, f64, f64, f64); 4] {
    let t0 = t0();
    [
        ("inner", PI / 2.0, t0, 0.96),
        ("middle", t0, 2.45 * PI, 0.60),
        ("outer", 2.45 * PI, 18.0, 0.99),
        ("tail", 18.0, f64::INFINITY, 0.032),
    ]
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Near-region mesh in radians; `None` means `π/(8(N+1))`.
    pub near_mesh: Option<f64>,
    pub far_samples: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            near_mesh: None,
            far_samples: 2000,
            margin: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NearCenterSummary {
    pub center: usize,
    pub sign: f64,
    pub samples: usize,
    pub min_signed_q: f64,
    pub max_signed_q: f64,
    /// `max u_m H_ii / (N+1)²`
    pub max_signed_diag_scaled: f64,
    /// `max |H_ij| / (N+1)²`, i ≠ j
    pub max_offdiag_scaled: f64,
    /// largest eigenvalue of `u_m H`, over `(N+1)²`
    pub max_signed_eigen_scaled: f64,
    /// diagonal negative and `|H_ii| > 2 max_{j≠i} |H_ij|` at every sample
    pub definite: bool,
    pub q_floor_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BandSummary {
    pub name: String,
    pub lo_t: f64,
    pub hi_t: f64,
    pub ceiling: f64,
    pub measured_max: f64,
    pub samples: usize,
    pub within: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub n: usize,
    pub m: usize,
    pub near_mesh: f64,
    pub margin: f64,
    pub near: Vec<NearCenterSummary>,
    pub near_definite: bool,
    pub near_q_ok: bool,
    /// soft reference values, logged only
    pub near_q_reference: f64,
    pub near_diag_reference: f64,
    pub near_offdiag_reference: f64,
    pub near_reference_met: bool,
    /// `max_i |q(x_i) − u_i|` and `max_i ‖∇q(x_i)‖_∞` from the mesh
    pub interpolation_value_residual: f64,
    pub interpolation_grad_residual: f64,
    pub far_max: f64,
    /// quaternion `(w, x, y, z)`
    pub far_argmax: Option<[f64; 4]>,
    pub far_haar_samples: usize,
    pub far_sweep_samples: usize,
    /// far draws that fell into a near ball and were left to the near mesh
    pub far_in_near_region: usize,
    pub bands: Vec<BandSummary>,
    pub bands_within_ceilings: bool,
    pub pass: bool,
}

struct FarPoint {
    x: Rotation,
    /// `(N+1)·` distance to the nearest center
    t: f64,
}

struct Mesh {
    near_mesh: f64,
    /// `(center, point, is_center)`
    near: Vec<(usize, Rotation, bool)>,
    far: Vec<FarPoint>,
    haar: usize,
    sweep: usize,
    skipped: usize,
}

fn build_mesh(centers: &SupportSet, n: usize, opts: &VerifyOptions) -> Result<Mesh> {
    let np1 = (n + 1) as f64;
    let radius = PI / (2.0 * np1);
    let max_mesh = PI / (8.0 * np1);
    let mesh = opts.near_mesh.unwrap_or(max_mesh);
    if !(mesh > 0.0 && mesh <= max_mesh * (1.0 + 1e-12)) {
        return domain(format!("near mesh {mesh:.4e} outside (0, pi/(8(N+1))]"));
    }
    let levels = (radius / mesh).ceil() as usize;
    let mut near = Vec::new();
    for (ci, c) in centers.points.iter().enumerate() {
        near.push((ci, *c, true));
        for l in 1..=levels {
            let r = radius * l as f64 / levels as f64;
            let count = ((4.0 * PI * (r / mesh).powi(2)).ceil() as usize).max(12);
            for a in fibonacci_sphere(count) {
                near.push((ci, c * &Rotation::exp(&(r * a)), false));
            }
        }
    }

    let nearest_t = |x: &Rotation| {
        centers
            .points
            .iter()
            .map(|c| geodesic_distance(x, c))
            .fold(f64::INFINITY, f64::min)
            * np1
    };
    let mut far = Vec::new();
    let mut skipped = 0;
    let mut push = |x: Rotation, far: &mut Vec<FarPoint>| {
        let t = nearest_t(&x);
        // 1e-9 absorbs roundoff for sweep points placed exactly on the ball boundary
        if t < PI / 2.0 - 1e-9 {
            skipped += 1;
        } else {
            far.push(FarPoint { x, t });
        }
    };
    let mut rng = stream(opts.seed, "certificate/far");
    for _ in 0..opts.far_samples {
        push(haar_sample(&mut rng), &mut far);
    }
    let axes = fibonacci_sphere(SWEEP_AXES);
    let steps = ((SWEEP_MAX_T - PI / 2.0) / SWEEP_STEP).floor() as usize;
    let mut sweep = 0;
    for c in &centers.points {
        for st in 0..=steps {
            let t = PI / 2.0 + st as f64 * SWEEP_STEP;
            let w = t / np1;
            if w > PI {
                break;
            }
            for a in &axes {
                push(c * &Rotation::exp(&(w * a)), &mut far);
                sweep += 1;
            }
        }
    }
    Ok(Mesh {
        near_mesh: mesh,
        near,
        far,
        haar: opts.far_samples,
        sweep,
        skipped,
    })
}

/// Values of each basis expansion on the mesh.
struct Sampled {
    nb: usize,
    /// per near point, per basis: value, gradient, Hessian
    near: Vec<Vec<(f64, Vector3<f64>, Matrix3<f64>)>>,
    /// per far point, per basis
    far: Vec<Vec<f64>>,
}

/// `bases[b] = (α_0, α)` per center.
type Basis = (Vec<f64>, Vec<Vector3<f64>>);

fn sample(kernel: &ZonalKernel, centers: &SupportSet, mesh: &Mesh, bases: &[Basis]) -> Sampled {
    let nb = bases.len();
    let near = mesh
        .near
        .par_iter()
        .map(|(_, x, _)| {
            let mut acc = vec![(0.0, Vector3::zeros(), Matrix3::zeros()); nb];
            for (j, c) in centers.points.iter().enumerate() {
                let d = kernel.derivs(x, c);
                let hy = [d.hessian_of_grad_y(0), d.hessian_of_grad_y(1), d.hessian_of_grad_y(2)];
                let h = d.hessian();
                for (slot, (a0, a)) in acc.iter_mut().zip(bases) {
                    let (a0, a) = (a0[j], a[j]);
                    slot.0 += a0 * d.val + a.dot(&d.gy);
                    slot.1 += a0 * d.gx + d.xy * a;
                    slot.2 += a0 * h + a[0] * hy[0] + a[1] * hy[1] + a[2] * hy[2];
                }
            }
            acc
        })
        .collect();
    let far = mesh
        .far
        .par_iter()
        .map(|p| {
            let mut acc = vec![0.0; nb];
            for (j, c) in centers.points.iter().enumerate() {
                let (v, g) = kernel.value_grad_y(&p.x, c);
                for (slot, (a0, a)) in acc.iter_mut().zip(bases) {
                    *slot += a0[j] * v + a[j].dot(&g);
                }
            }
            acc
        })
        .collect();
    Sampled { nb, near, far }
}

fn assess(mesh: &Mesh, sampled: &Sampled, weights: &[f64], signs: &[f64], n: usize, margin: f64) -> VerificationReport {
    debug_assert_eq!(weights.len(), sampled.nb);
    let m = signs.len();
    let np2 = ((n + 1) as f64).powi(2);
    let mut near: Vec<NearCenterSummary> = (0..m)
        .map(|c| NearCenterSummary {
            center: c,
            sign: signs[c],
            samples: 0,
            min_signed_q: f64::INFINITY,
            max_signed_q: f64::NEG_INFINITY,
            max_signed_diag_scaled: f64::NEG_INFINITY,
            max_offdiag_scaled: 0.0,
            max_signed_eigen_scaled: f64::NEG_INFINITY,
            definite: true,
            q_floor_ok: true,
        })
        .collect();
    let (mut res_v, mut res_g) = (0.0f64, 0.0f64);
    for ((ci, _, is_center), vals) in mesh.near.iter().zip(&sampled.near) {
        let mut q = 0.0;
        let mut g = Vector3::zeros();
        let mut h = Matrix3::zeros();
        for (w, (v, gv, hv)) in weights.iter().zip(vals) {
            q += w * v;
            g += *w * gv;
            h += *w * hv;
        }
        let u = signs[*ci];
        if *is_center {
            res_v = res_v.max((q - u).abs());
            res_g = res_g.max(g.amax());
        }
        let uh = u * h;
        let s = &mut near[*ci];
        s.samples += 1;
        s.min_signed_q = s.min_signed_q.min(u * q);
        s.max_signed_q = s.max_signed_q.max(u * q);
        let mut offmax = 0.0f64;
        let mut diagmax = f64::NEG_INFINITY;
        let mut diagmin_abs = f64::INFINITY;
        for i in 0..3 {
            diagmax = diagmax.max(uh[(i, i)]);
            diagmin_abs = diagmin_abs.min(uh[(i, i)].abs());
            for j in 0..3 {
                if i != j {
                    offmax = offmax.max(uh[(i, j)].abs());
                }
            }
        }
        s.max_signed_diag_scaled = s.max_signed_diag_scaled.max(diagmax / np2);
        s.max_offdiag_scaled = s.max_offdiag_scaled.max(offmax / np2);
        let sym = 0.5 * (uh + uh.transpose());
        let emax = SymmetricEigen::new(sym).eigenvalues.max();
        s.max_signed_eigen_scaled = s.max_signed_eigen_scaled.max(emax / np2);
        if !(diagmax < 0.0 && diagmin_abs > 2.0 * offmax) {
            s.definite = false;
        }
        if u * q <= NEAR_Q_FLOOR {
            s.q_floor_ok = false;
        }
    }

    let band_defs = bands();
    let mut band_max = [0.0f64; 4];
    let mut band_count = [0usize; 4];
    let mut far_max = 0.0f64;
    let mut far_arg = None;
    for (p, vals) in mesh.far.iter().zip(&sampled.far) {
        let q: f64 = weights.iter().zip(vals).map(|(w, v)| w * v).sum();
        if q.abs() > far_max {
            far_max = q.abs();
            far_arg = Some(p.x.to_quaternion());
        }
        let b = band_defs
            .iter()
            .position(|(_, lo, hi, _)| p.t >= *lo - 1e-9 && p.t < *hi)
            .unwrap_or(3);
        band_max[b] = band_max[b].max(q.abs());
        band_count[b] += 1;
    }
    let bands: Vec<BandSummary> = band_defs
        .iter()
        .enumerate()
        .map(|(i, (name, lo, hi, ceil))| BandSummary {
            name: name.to_string(),
            lo_t: *lo,
            hi_t: *hi,
            ceiling: *ceil,
            measured_max: band_max[i],
            samples: band_count[i],
            within: band_max[i] <= ceil + BAND_SLACK,
        })
        .collect();
    let near_definite = near.iter().all(|s| s.definite);
    let near_q_ok = near.iter().all(|s| s.q_floor_ok);
    let near_reference_met = near.iter().all(|s| {
        s.min_signed_q >= NEAR_Q_REFERENCE
            && s.max_signed_diag_scaled <= NEAR_DIAG_REFERENCE
            && s.max_offdiag_scaled <= NEAR_OFFDIAG_REFERENCE
    });
    let bands_within_ceilings = bands.iter().all(|b| b.within);
    VerificationReport {
        n,
        m,
        near_mesh: mesh.near_mesh,
        margin,
        near,
        near_definite,
        near_q_ok,
        near_q_reference: NEAR_Q_REFERENCE,
        near_diag_reference: NEAR_DIAG_REFERENCE,
        near_offdiag_reference: NEAR_OFFDIAG_REFERENCE,
        near_reference_met,
        interpolation_value_residual: res_v,
        interpolation_grad_residual: res_g,
        far_max,
        far_argmax: far_arg,
        far_haar_samples: mesh.haar,
        far_sweep_samples: mesh.sweep,
        far_in_near_region: mesh.skipped,
        bands,
        bands_within_ceilings,
        pass: near_definite && far_max < 1.0 - margin,
    }
}

pub fn verify_certificate(cert: &Certificate, opts: &VerifyOptions) -> Result<VerificationReport> {
    let n = cert.kernel.degree();
    let mesh = build_mesh(&cert.centers, n, opts)?;
    let basis = (cert.expansion.alpha0.clone(), cert.expansion.alpha.clone());
    let sampled = sample(&cert.kernel, &cert.centers, &mesh, &[basis]);
    Ok(assess(&mesh, &sampled, &[1.0], &cert.signs, n, opts.margin))
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternResult {
    pub signs: Vec<i8>,
    pub solve_residual: f64,
    pub interpolation_value_residual: f64,
    pub interpolation_grad_residual: f64,
    pub coefficients: CoefficientCheck,
    pub near_definite: bool,
    pub near_q_ok: bool,
    pub min_signed_q: f64,
    pub far_max: f64,
    pub band_maxima: Vec<f64>,
    pub bands_within_ceilings: bool,
    /// verification pass flag
    pub pass: bool,
    /// `pass` plus interpolation residuals, coefficient bounds, near q floor and band ceilings
    pub all_checks: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternSummary {
    pub m: usize,
    pub total_patterns: u64,
    pub tested: usize,
    pub exhaustive: bool,
    pub passed: usize,
    pub all_checks_passed: usize,
    pub condition: f64,
    pub worst_far_max: f64,
    pub worst_band_maxima: Vec<f64>,
    pub worst_interpolation_residual: f64,
    pub patterns: Vec<PatternResult>,
}

fn pattern_signs(bits: u64, m: usize) -> Vec<f64> {
    (0..m).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// All `2^M` patterns if `2^M ≤ limit`, otherwise `limit` distinct uniformly drawn ones.
pub fn enumerate_sign_patterns(
    system: &FactoredSystem,
    limit: usize,
    opts: &VerifyOptions,
) -> Result<PatternSummary> {
    let sys = &system.system;
    let m = sys.m();
    if m > MAX_PATTERN_M {
        return Err(Error::Capability(format!("pattern enumeration supports M <= {MAX_PATTERN_M}, got {m}")));
    }
    if limit == 0 {
        return domain("pattern limit must be positive");
    }
    let total = 1u64 << m;
    let exhaustive = total <= limit as u64;
    let codes: Vec<u64> = if exhaustive {
        (0..total).collect()
    } else {
        let mut rng = stream(opts.seed, "certificate/patterns");
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(limit);
        while out.len() < limit {
            let c = rng.gen_range(0..total);
            if seen.insert(c) {
                out.push(c);
            }
        }
        out
    };

    let n = sys.kernel.degree();
    let c_s = sys.kernel.spec().constants.c_s;
    // β_i = K⁻¹ e_i for the value rows
    let betas: Vec<DVector<f64>> = (0..m).map(|i| system.inverse.column(i).into_owned()).collect();
    let bases: Vec<Basis> = betas.iter().map(|b| split_alpha(b, m)).collect();
    let mesh = build_mesh(&sys.centers, n, opts)?;
    let sampled = sample(&sys.kernel, &sys.centers, &mesh, &bases);

    let results: Vec<PatternResult> = codes
        .par_iter()
        .map(|&code| {
            let u = pattern_signs(code, m);
            let mut x = DVector::zeros(4 * m);
            for (ui, b) in u.iter().zip(&betas) {
                x += *ui * b;
            }
            let rhs = sys.rhs(&u).expect("pattern signs are +-1");
            let solve_residual = (&sys.matrix * &x - rhs).amax();
            let (a0, a) = split_alpha(&x, m);
            let coefficients = coefficient_check(&a0, &a, &u, c_s, n, DEFAULT_B);
            let rep = assess(&mesh, &sampled, &u, &u, n, opts.margin);
            let min_signed_q = rep.near.iter().map(|s| s.min_signed_q).fold(f64::INFINITY, f64::min);
            let interp_ok = rep.interpolation_value_residual <= super::INTERPOLATION_TOL
                && rep.interpolation_grad_residual <= super::INTERPOLATION_TOL;
            let all_checks =
                rep.pass && interp_ok && coefficients.holds && rep.near_q_ok && rep.bands_within_ceilings;
            PatternResult {
                signs: u.iter().map(|v| *v as i8).collect(),
                solve_residual,
                interpolation_value_residual: rep.interpolation_value_residual,
                interpolation_grad_residual: rep.interpolation_grad_residual,
                coefficients,
                near_definite: rep.near_definite,
                near_q_ok: rep.near_q_ok,
                min_signed_q,
                far_max: rep.far_max,
                band_maxima: rep.bands.iter().map(|b| b.measured_max).collect(),
                bands_within_ceilings: rep.bands_within_ceilings,
                pass: rep.pass,
                all_checks,
            }
        })
        .collect();
    let mut worst_band = vec![0.0f64; 4];
    for r in &results {
        for (w, v) in worst_band.iter_mut().zip(&r.band_maxima) {
            *w = w.max(*v);
        }
    }
    Ok(PatternSummary {
        m,
        total_patterns: total,
        tested: results.len(),
        exhaustive,
        passed: results.iter().filter(|r| r.pass).count(),
        all_checks_passed: results.iter().filter(|r| r.all_checks).count(),
        condition: system.condition,
        worst_far_max: results.iter().map(|r| r.far_max).fold(0.0, f64::max),
        worst_band_maxima: worst_band,
        worst_interpolation_residual: results
            .iter()
            .map(|r| r.interpolation_value_residual.max(r.interpolation_grad_residual))
            .fold(0.0, f64::max),
        patterns: results,
    })
}
