//! Levenberg–Marquardt on `(centers, coefficients)` minimizing the
//! `h_N`-weighted moment misfit `½‖A(μ) − b‖²_h`. Centers move by right
//! translation `x ← x·exp(δ)`; the Jacobian uses central differences along
//! `X_1, X_2, X_3`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use serde::Serialize;

use super::l1::entry_weights;
use super::Spike;
use crate::error::{domain, Result};
use crate::so3::Rotation;
use crate::wigner::{wigner_all, MomentVector};

#[derive(Clone, Debug)]
pub struct RefineOptions {
    pub max_iters: usize,
    /// central-difference step for the center columns
    pub step: f64,
    /// smallest accepted eigenvalue ratio of the scaled normal matrix
    pub rank_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_iters: 100,
            step: 1e-5,
            rank_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RefineStats {
    pub iterations: usize,
    pub accepted_steps: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub rank_deficient: bool,
    /// smallest/largest eigenvalue of the scaled normal matrix at the start
    pub conditioning: f64,
}

struct Problem<'a> {
    n: usize,
    b: &'a MomentVector,
    sqrt_w: Vec<f64>,
}

impl Problem<'_> {
    fn column(&self, x: &Rotation) -> Result<Vec<f64>> {
        let d = wigner_all(self.n, x)?;
        let mut out = Vec::with_capacity(2 * d.len());
        for (e, w) in d.iter().zip(&self.sqrt_w) {
            out.push(w * e.re);
            out.push(w * e.im);
        }
        out[0] = self.sqrt_w[0];
        out[1] = 0.0;
        Ok(out)
    }

    fn residual(&self, spikes: &[Spike]) -> Result<DVector<f64>> {
        let mut r = DVector::from_iterator(
            2 * self.b.entries.len(),
            self.b.entries.iter().zip(&self.sqrt_w).flat_map(|(e, w)| [-w * e.re, -w * e.im]),
        );
        for s in spikes {
            let c = self.column(&s.center)?;
            for (ri, ci) in r.iter_mut().zip(&c) {
                *ri += s.coeff * ci;
            }
        }
        Ok(r)
    }

    fn jacobian(&self, spikes: &[Spike], h: f64) -> Result<DMatrix<f64>> {
        let rows = 2 * self.b.entries.len();
        let mut j = DMatrix::zeros(rows, 4 * spikes.len());
        for (i, s) in spikes.iter().enumerate() {
            j.column_mut(4 * i).copy_from_slice(&self.column(&s.center)?);
            for a in 0..3 {
                let p = self.column(&s.center.right_translate(a, h))?;
                let m = self.column(&s.center.right_translate(a, -h))?;
                let mut col = j.column_mut(4 * i + 1 + a);
                for k in 0..rows {
                    col[k] = s.coeff * (p[k] - m[k]) / (2.0 * h);
                }
            }
        }
        Ok(j)
    }
}

fn apply(spikes: &[Spike], d: &DVector<f64>) -> Vec<Spike> {
    spikes
        .iter()
        .enumerate()
        .map(|(i, s)| Spike {
            center: s.center * Rotation::exp(&Vector3::new(d[4 * i + 1], d[4 * i + 2], d[4 * i + 3])),
            coeff: s.coeff + d[4 * i],
        })
        .collect()
}

/// Refines `coarse` against the moments `b`. A rank-deficient start (for
/// example two coincident spikes) is returned unchanged and flagged.
pub fn local_refine(coarse: &[Spike], b: &MomentVector, h: &[f64], opts: &RefineOptions) -> Result<(Vec<Spike>, RefineStats)> {
    if h.len() != b.degree_max + 1 {
        return domain(format!("{} weights for moments of degree {}", h.len(), b.degree_max));
    }
    let prob = Problem {
        n: b.degree_max,
        b,
        sqrt_w: entry_weights(h).iter().map(|w| w.sqrt()).collect(),
    };
    let mut spikes = coarse.to_vec();
    let mut r = prob.residual(&spikes)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut stats = RefineStats {
        iterations: 0,
        accepted_steps: 0,
        initial_cost: cost,
        final_cost: cost,
        rank_deficient: false,
        conditioning: 1.0,
    };
    if spikes.is_empty() || cost == 0.0 {
        return Ok((spikes, stats));
    }
    let mut damping = 1e-3;
    for it in 0..opts.max_iters {
        stats.iterations = it + 1;
        let j = prob.jacobian(&spikes, opts.step)?;
        let a = j.transpose() * &j;
        let g = j.transpose() * &r;
        let diag: Vec<f64> = (0..a.nrows()).map(|i| a[(i, i)].max(f64::MIN_POSITIVE)).collect();
        if it == 0 {
            let an = DMatrix::from_fn(a.nrows(), a.ncols(), |p, q| a[(p, q)] / (diag[p] * diag[q]).sqrt());
            let ev = SymmetricEigen::new(an).eigenvalues;
            stats.conditioning = ev.min() / ev.max();
            if !(stats.conditioning > opts.rank_tol) {
                stats.rank_deficient = true;
                return Ok((coarse.to_vec(), stats));
            }
        }
        if g.amax() == 0.0 {
            break;
        }
        let mut accepted = false;
        while damping < 1e16 {
            let mut m = a.clone();
            for (i, d) in diag.iter().enumerate() {
                m[(i, i)] += damping * d;
            }
            let Some(ch) = m.cholesky() else {
                damping *= 4.0;
                continue;
            };
            let step = -ch.solve(&g);
            let trial = apply(&spikes, &step);
            let rt = prob.residual(&trial)?;
            let ct = 0.5 * rt.norm_squared();
            if ct < cost {
                let small = step.amax() < 1e-14 || cost - ct <= 1e-15 * cost;
                spikes = trial;
                r = rt;
                cost = ct;
                damping = (damping / 3.0).max(1e-12);
                stats.accepted_steps += 1;
                accepted = !small;
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    stats.final_cost = cost;
    Ok((spikes, stats))
}

/// `max` geodesic and coefficient change between two spike lists of equal length.
pub fn step_size(a: &[Spike], b: &[Spike]) -> (f64, f64) {
    a.iter().zip(b).fold((0.0f64, 0.0f64), |acc, (x, y)| {
        (
            acc.0.max(crate::so3::geodesic_distance(&x.center, &y.center)),
            acc.1.max((x.coeff - y.coeff).abs()),
        )
    })
}
