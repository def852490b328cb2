//! Numerical checks of the localization, Lipschitz and off-diagonal sum bounds.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{third_from, KernelDerivs, ThirdPattern, ZonalKernel};
use crate::error::{Error, Result};
use crate::filter::offdiag_constants;
use crate::rng::stream;
use crate::so3::{geodesic_distance, haar_sample, levi_civita, Rotation, SupportSet};

const CHUNK: usize = 512;

#[derive(Clone, Debug)]
pub struct LocalizationOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for LocalizationOptions {
    fn default() -> Self {
        LocalizationOptions { samples: 10_000, seed: 0 }
    }
}

/// Worst measured/bound ratio of one inequality over its sample set.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LocalizationRow {
    pub name: String,
    pub s: usize,
    pub n: usize,
    pub worst_ratio: f64,
    /// Angle `t` or `ω` where the worst ratio occurred.
    pub arg_at_worst: f64,
    pub samples: usize,
    /// False for rows evaluated outside the hypothesis region (informational).
    pub applicable: bool,
}

#[derive(Clone, Copy)]
struct Worst {
    ratio: f64,
    arg: f64,
}

impl Worst {
    const NONE: Worst = Worst { ratio: f64::NEG_INFINITY, arg: f64::NAN };

    fn push(&mut self, ratio: f64, arg: f64) {
        if ratio > self.ratio || ratio.is_nan() {
            self.ratio = ratio;
            self.arg = arg;
        }
    }

    fn merge(mut self, o: Worst) -> Worst {
        self.push(o.ratio, o.arg);
        self
    }
}

/// Runs `f` on `samples` indices split into fixed chunks, each chunk with its
/// own labelled RNG stream, and merges the per-bound maxima in chunk order.
fn sample_max<F>(samples: usize, seed: u64, label: &str, rows: usize, f: F) -> Vec<Worst>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut [Worst]) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Worst>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, &format!("{label}/{c}"));
            let mut w = vec![Worst::NONE; rows];
            let count = CHUNK.min(samples - c * CHUNK);
            for _ in 0..count {
                f(&mut rng, &mut w);
            }
            w
        })
        .collect();
    per_chunk.into_iter().fold(vec![Worst::NONE; rows], |acc, w| {
        acc.into_iter().zip(w).map(|(a, b)| a.merge(b)).collect()
    })
}

fn random_axis<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Pair `(x, y)` with `y` Haar-distributed and `ω(y⁻¹x) = omega`.
fn pair_at<R: Rng>(rng: &mut R, omega: f64) -> (Rotation, Rotation) {
    let y = haar_sample(rng);
    let x = y * Rotation::exp(&(omega * random_axis(rng)));
    (x, y)
}

fn max_offdiag<F: Fn(usize, usize) -> f64>(f: F) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..3 {
        for i in 0..3 {
            if i != j {
                m = m.max(f(j, i).abs());
            }
        }
    }
    m
}

/// `[iik, iii, hess_second, hess_third]` magnitudes at one pair.
fn second_family(d: &KernelDerivs) -> [f64; 4] {
    let mut iik: f64 = 0.0;
    let mut iii: f64 = 0.0;
    for p in ThirdPattern::all() {
        match p {
            ThirdPattern::IIK { .. } => iik = iik.max(third_from(d, p).abs()),
            ThirdPattern::III { .. } => iii = iii.max(third_from(d, p).abs()),
            _ => {}
        }
    }
    let h = d.hessian();
    let hs = max_offdiag(|j, i| h[(j, i)]);
    let mut ht: f64 = 0.0;
    for k in 0..3 {
        let hk = d.hessian_of_grad_y(k);
        ht = ht.max(max_offdiag(|j, i| hk[(j, i)]));
    }
    [iik, iii, hs, ht]
}

/// Evaluates every localization family on random samples.
///
/// Rows: `trig_l0..trig_l3` on `t ∈ [π/(2(N+1)), π]`; `local_grad`,
/// `local_mixed`, `local2_iik`, `local2_iii`, `local2_hess_second`,
/// `local2_hess_third` on pairs with `ω` in the same range; `lip_diag`,
/// `lip_iik`, `lip_hess_second`, `lip_hess_third` on `ω ≤ π/(2(N+1))` with
/// the tightest admissible `δ = (N+1)ω`; and `trig_l0_small_t`, evaluated
/// below the hypothesis region and marked not applicable.
pub fn verify_localization(kernel: &ZonalKernel, opts: &LocalizationOptions) -> Result<Vec<LocalizationRow>> {
    let spec = kernel.spec();
    let (s, n) = (spec.s, spec.n);
    if opts.samples == 0 {
        return Err(Error::Domain("verify_localization needs at least one sample".into()));
    }
    let np1 = (n + 1) as f64;
    let t0 = PI / (2.0 * np1);
    let c = spec.constants.c_loc;
    let sp = s as i32;
    let row = |name: &str, w: Worst, applicable: bool| LocalizationRow {
        name: name.to_string(),
        s,
        n,
        worst_ratio: w.ratio,
        arg_at_worst: w.arg,
        samples: opts.samples,
        applicable,
    };
    let mut out = Vec::new();

    let trig = sample_max(opts.samples, opts.seed, "trig", 4, |rng, w| {
        let t = rng.gen_range(t0..=PI);
        let st = kernel.sigma_tilde_all(t);
        for l in 0..4 {
            w[l].push(st[l].abs() / spec.trig_bound(l, t), t);
        }
    });
    for l in 0..4 {
        out.push(row(&format!("trig_l{l}"), trig[l], true));
    }

    let local = sample_max(opts.samples, opts.seed, "local", 6, |rng, w| {
        let omega = rng.gen_range(t0..=PI);
        let (x, y) = pair_at(rng, omega);
        let d = kernel.derivs(&x, &y);
        let den = omega.powi(sp);
        let b1 = c[1] / (np1.powi(sp - 1) * den);
        let b2 = c[2] / (np1.powi(sp - 2) * den);
        let b3 = 1.2 * c[3] / (np1.powi(sp - 3) * den);
        w[0].push(d.gy.amax() / b1, omega);
        w[1].push(d.xy.amax() / b2, omega);
        let f = second_family(&d);
        w[2].push(f[0] / b3, omega);
        w[3].push(f[1] / b3, omega);
        w[4].push(f[2] / b2, omega);
        w[5].push(f[3] / b3, omega);
    });
    for (i, name) in ["local_grad", "local_mixed", "local2_iik", "local2_iii", "local2_hess_second", "local2_hess_third"]
        .iter()
        .enumerate()
    {
        out.push(row(name, local[i], true));
    }

    let dt = spec.constants.d_s_tilde;
    let ct = spec.constants.c_s_tilde;
    let s2_0 = kernel.sigma_tilde_all(0.0)[2];
    let lip = sample_max(opts.samples, opts.seed, "lip", 4, |rng, w| {
        let omega = rng.gen_range(0.0..=t0).max(f64::MIN_POSITIVE);
        let (x, y) = pair_at(rng, omega);
        let d = kernel.derivs(&x, &y);
        let delta = np1 * omega;
        let diag = (0..3).map(|i| (d.xx[(i, i)] - s2_0).abs()).fold(0.0, f64::max);
        let b_diag = 0.5 * dt * np1 * np1 * delta * delta;
        let b_third = dt * (np1.powi(3) * delta + 0.25 * np1 * np1 * delta * delta) + 0.25 * ct * np1 * delta;
        let b_hess = 0.25 * dt * np1 * np1 * delta * delta;
        let f = second_family(&d);
        w[0].push(diag / b_diag, omega);
        w[1].push(f[0].max(f[1]) / b_third, omega);
        w[2].push(f[2] / b_hess, omega);
        w[3].push(f[3] / b_third, omega);
    });
    for (i, name) in ["lip_diag", "lip_iik", "lip_hess_second", "lip_hess_third"].iter().enumerate() {
        out.push(row(name, lip[i], true));
    }

    let small = sample_max(opts.samples, opts.seed, "trig_small", 1, |rng, w| {
        let t = rng.gen_range(0.0..t0).max(1e-300);
        w[0].push(kernel.sigma_tilde_all(t)[0].abs() / spec.trig_bound(0, t), t);
    });
    out.push(row("trig_l0_small_t", small[0], false));
    Ok(out)
}

/// One off-diagonal sum against its right-hand side.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OffdiagRow {
    pub name: String,
    pub sum: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Direct evaluation of the six off-diagonal sums over `C ∖ {x_j}`, where
/// `x_j` is the support point nearest to `x`. Each sum is maximized over its
/// free axis indices. `hess_third_cubic` repeats the last sum against a
/// right-hand side with `(N+1)³`.
pub fn verify_offdiag_sums(
    kernel: &ZonalKernel,
    support: &SupportSet,
    x: &Rotation,
    eps: f64,
    nu: f64,
) -> Result<Vec<OffdiagRow>> {
    let spec = kernel.spec();
    let np1 = (spec.n + 1) as f64;
    if support.is_empty() {
        return Err(Error::Domain("empty support".into()));
    }
    if nu < PI {
        return Err(Error::Domain(format!("super-resolution factor nu = {nu} below pi")));
    }
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::Domain(format!("epsilon = {eps} outside [0, 1/2]")));
    }
    if support.separation < nu / np1 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "separation {} below nu/(N+1) = {}",
            support.separation,
            nu / np1
        )));
    }
    let (jn, dist) = support
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, geodesic_distance(x, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    if dist > eps * nu / np1 * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::Domain(format!(
            "distance {dist} to nearest support point exceeds eps*nu/(N+1) = {}",
            eps * nu / np1
        )));
    }
    let mut sums = [[0.0f64; 27]; 6];
    for (i, p) in support.points.iter().enumerate() {
        if i == jn {
            continue;
        }
        let d = kernel.derivs(x, p);
        sums[0][0] += d.val.abs();
        for a in 0..3 {
            sums[1][a] += d.gy[a].abs();
            for b in 0..3 {
                sums[2][3 * a + b] += d.xy[(a, b)].abs();
                // X_a X_a X_b^y
                sums[3][3 * a + b] += d.xxy[b][(a, a)].abs();
            }
        }
        let h = d.hessian();
        for j in 0..3 {
            for i2 in 0..3 {
                if j == i2 {
                    continue;
                }
                sums[4][3 * j + i2] += (h[(j, i2)]).abs();
                for k in 0..3 {
                    let v = d.xxy[k][(j, i2)]
                        - 0.5 * (0..3).map(|m| levi_civita(j, i2, m) * d.xy[(m, k)]).sum::<f64>();
                    sums[5][9 * j + 3 * i2 + k] += v.abs();
                }
            }
        }
    }
    let best = |v: &[f64; 27]| v.iter().cloned().fold(0.0, f64::max);
    let o = offdiag_constants(spec.s, eps)?;
    let nus = nu.powi(spec.s as i32);
    let cc = o.c_off;
    let a = o.a_eps;
    let bounds = [
        ("value", cc[0] * a / nus),
        ("grad", cc[1] * a * np1 / nus),
        ("mixed", cc[2] * a * np1 * np1 / nus),
        ("iik", 1.2 * cc[3] * a * np1.powi(3) / nus),
        ("hess_second", cc[2] * a * np1 * np1 / nus),
        ("hess_third", 1.2 * cc[3] * a * np1 * np1 / nus),
    ];
    let mut rows: Vec<OffdiagRow> = bounds
        .iter()
        .enumerate()
        .map(|(i, (name, bound))| {
            let sum = best(&sums[i]);
            OffdiagRow { name: name.to_string(), sum, bound: *bound, ratio: sum / bound }
        })
        .collect();
    let sum = best(&sums[5]);
    let bound = 1.2 * cc[3] * a * np1.powi(3) / nus;
    rows.push(OffdiagRow { name: "hess_third_cubic".into(), sum, bound, ratio: sum / bound });
    Ok(rows)
}
