//! Gridded ℓ1 surrogate of the TV problem.
//!
//! Moments are weighted by the filter weights `h_N(l)` before fitting. The
//! weighted Gram matrix of the design columns is then the localized kernel,
//! `Re⟨A_i, A_j⟩_h = σ_N(g_i, g_j)`, so the fit needs no design matrix:
//!
//! `min ½cᵀQc − pᵀc + λ‖c‖₁`, `Q_ij = σ_N(g_i, g_j)`, `p_j = Re⟨A_j, b⟩_h`,
//!
//! which is `min ½‖A c − b‖²_h + λ‖c‖₁` up to the constant `½‖b‖²_h`. It is
//! solved by ADMM on a working set that grows until the full-grid optimality
//! conditions hold.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::kernel::ZonalKernel;
use crate::so3::Rotation;
use crate::wigner::{moment_count, wigner_all, MomentVector};

/// Lazily evaluated design `A[:, j] = (D^l_{k,m}(g_j))`.
#[derive(Clone, Debug)]
pub struct MomentOperator {
    pub n: usize,
    pub grid: Vec<Rotation>,
    kernel: Arc<ZonalKernel>,
    /// `h_N(l)` per moment entry
    entry_weights: Vec<f64>,
}

pub(crate) fn entry_weights(h: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(moment_count(h.len() - 1));
    for (l, hl) in h.iter().enumerate() {
        w.extend(std::iter::repeat(*hl).take((2 * l + 1) * (2 * l + 1)));
    }
    w
}

impl MomentOperator {
    pub fn new(grid: Vec<Rotation>, kernel: Arc<ZonalKernel>) -> Result<Self> {
        if grid.is_empty() {
            return domain("empty grid");
        }
        let entry_weights = entry_weights(&kernel.spec().weights);
        Ok(MomentOperator {
            n: kernel.degree(),
            grid,
            kernel,
            entry_weights,
        })
    }

    pub fn kernel(&self) -> &Arc<ZonalKernel> {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn column(&self, j: usize) -> Result<Vec<Complex64>> {
        let mut c = wigner_all(self.n, &self.grid[j])?;
        c[0] = Complex64::new(1.0, 0.0);
        Ok(c)
    }

    /// Dense design, for small problems and tests.
    pub fn design(&self) -> Result<DMatrix<Complex64>> {
        let rows = moment_count(self.n);
        let mut a = DMatrix::zeros(rows, self.len());
        for j in 0..self.len() {
            a.column_mut(j).copy_from_slice(&self.column(j)?);
        }
        Ok(a)
    }

    fn check(&self, b: &MomentVector) -> Result<()> {
        if b.degree_max != self.n {
            return domain(format!("moments of degree {} for an operator of degree {}", b.degree_max, self.n));
        }
        Ok(())
    }

    /// `p_j = Re Σ h_l b_e conj(A_{e,j})`.
    pub fn weighted_adjoint(&self, b: &MomentVector) -> Result<Vec<f64>> {
        self.check(b)?;
        let bw: Vec<Complex64> = b.entries.iter().zip(&self.entry_weights).map(|(v, w)| v * w).collect();
        (0..self.len())
            .map(|j| {
                let col = self.column(j)?;
                Ok(col.iter().zip(&bw).map(|(a, v)| (v * a.conj()).re).sum())
            })
            .collect()
    }

    /// `‖b‖²_h`.
    pub fn weighted_norm_sq(&self, b: &MomentVector) -> Result<f64> {
        self.check(b)?;
        Ok(b.entries.iter().zip(&self.entry_weights).map(|(v, w)| w * v.norm_sqr()).sum())
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.kernel.sigma(&self.grid[i], &self.grid[j])
        }
    }
}

#[derive(Clone, Debug)]
pub struct L1Options {
    pub lambda: f64,
    /// ADMM iteration cap per working-set round
    pub iters: usize,
    pub rho: f64,
    pub tol: f64,
    pub max_rounds: usize,
    /// optimality violators added per round
    pub batch: usize,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            lambda: 1e-2,
            iters: 2000,
            rho: 1.0,
            tol: 1e-8,
            max_rounds: 50,
            batch: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct L1Solution {
    #[serde(skip)]
    pub coeffs: Vec<f64>,
    pub nonzeros: usize,
    pub working_set: usize,
    pub rounds: usize,
    /// ADMM iterations summed over rounds
    pub iterations: usize,
    pub converged: bool,
    /// `½cᵀQc − pᵀc + λ‖c‖₁` after each round
    pub objective_history: Vec<f64>,
    pub monotone: bool,
    /// `‖A c − b‖_h`
    pub gap: f64,
    /// largest `|p_j − (Qc)_j| − λ` over the grid
    pub kkt_violation: f64,
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

struct Admm {
    converged: bool,
    iterations: usize,
}

/// ADMM for `min ½cᵀQc − pᵀc + λ‖z‖₁`, `c = z`, warm started from `z`.
fn admm(q: &DMatrix<f64>, p: &DVector<f64>, z: &mut DVector<f64>, o: &L1Options) -> Result<Admm> {
    let n = p.len();
    let chol = (q + DMatrix::identity(n, n) * o.rho)
        .cholesky()
        .ok_or_else(|| Error::Consistency("grid Gram matrix is not positive definite".into()))?;
    let mut u = DVector::zeros(n);
    let t = o.lambda / o.rho;
    for it in 1..=o.iters {
        let c = chol.solve(&(p + (&*z - &u) * o.rho));
        let z_old = z.clone();
        for k in 0..n {
            z[k] = soft(c[k] + u[k], t);
        }
        u += &c - &*z;
        let primal = (&c - &*z).norm();
        let dual = o.rho * (&*z - &z_old).norm();
        if primal <= o.tol && dual <= o.tol {
            return Ok(Admm { converged: true, iterations: it });
        }
    }
    Ok(Admm { converged: false, iterations: o.iters })
}

fn objective(q: &DMatrix<f64>, p: &DVector<f64>, z: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * z.dot(&(q * z)) - p.dot(z) + lambda * z.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn l1_recover(b: &MomentVector, op: &MomentOperator, opts: &L1Options) -> Result<L1Solution> {
    if !(opts.lambda > 0.0) {
        return domain(format!("lambda must be positive, got {}", opts.lambda));
    }
    if opts.iters == 0 {
        return domain("ADMM iteration count must be positive");
    }
    let g = op.len();
    let p = op.weighted_adjoint(b)?;
    let bnorm = op.weighted_norm_sq(b)?;
    let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut coeffs = vec![0.0; g];
    if pmax <= opts.lambda {
        return Ok(L1Solution {
            coeffs,
            nonzeros: 0,
            working_set: 0,
            rounds: 0,
            iterations: 0,
            converged: true,
            objective_history: vec![0.0],
            monotone: true,
            gap: bnorm.sqrt(),
            kkt_violation: pmax - opts.lambda,
        });
    }

    let mut set: Vec<usize> = (0..g).filter(|&j| p[j].abs() >= 0.5 * pmax).collect();
    let mut z = DVector::zeros(set.len());
    let mut history = Vec::new();
    let (mut iterations, mut converged, mut rounds) = (0, true, 0);
    let mut violation;
    loop {
        rounds += 1;
        let n = set.len();
        let q = DMatrix::from_fn(n, n, |a, c| op.gram(set[a], set[c]));
        let ps = DVector::from_iterator(n, set.iter().map(|&j| p[j]));
        let run = admm(&q, &ps, &mut z, opts)?;
        iterations += run.iterations;
        converged &= run.converged;
        history.push(objective(&q, &ps, &z, opts.lambda));

        // full-grid optimality: |p_j − (Qz)_j| ≤ λ off the working set
        let active: Vec<(usize, f64)> = set.iter().zip(z.iter()).filter(|(_, v)| **v != 0.0).map(|(j, v)| (*j, *v)).collect();
        let mut in_set = vec![false; g];
        for &j in &set {
            in_set[j] = true;
        }
        let mut viol: Vec<(usize, f64)> = Vec::new();
        violation = f64::NEG_INFINITY;
        for j in 0..g {
            let r = p[j] - active.iter().map(|(i, v)| v * op.gram(j, *i)).sum::<f64>();
            let e = r.abs() - opts.lambda;
            if !in_set[j] {
                violation = violation.max(e);
                if e > opts.tol {
                    viol.push((j, e));
                }
            }
        }
        if viol.is_empty() || rounds >= opts.max_rounds {
            if !viol.is_empty() {
                converged = false;
            }
            break;
        }
        viol.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let add: Vec<usize> = viol.iter().take(opts.batch).map(|v| v.0).collect();
        set.extend(&add);
        z = DVector::from_iterator(set.len(), z.iter().copied().chain(std::iter::repeat(0.0).take(add.len())));
    }
    for (j, v) in set.iter().zip(z.iter()) {
        coeffs[*j] = *v;
    }
    let sparse: Vec<(usize, f64)> = (0..g).filter(|&j| coeffs[j] != 0.0).map(|j| (j, coeffs[j])).collect();
    let (quad, lin) = quad_lin(op, &p, &sparse);
    let gap = (quad - 2.0 * lin + bnorm).max(0.0).sqrt();
    let scale = history.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let monotone = history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * scale);
    Ok(L1Solution {
        nonzeros: sparse.len(),
        coeffs,
        working_set: set.len(),
        rounds,
        iterations,
        converged,
        objective_history: history,
        monotone,
        gap,
        kkt_violation: violation,
    })
}

fn quad_lin(op: &MomentOperator, p: &[f64], c: &[(usize, f64)]) -> (f64, f64) {
    let mut quad = 0.0;
    for (i, a) in c {
        for (j, b) in c {
            quad += a * b * op.gram(*i, *j);
        }
    }
    (quad, c.iter().map(|(j, v)| v * p[*j]).sum())
}

/// `½cᵀQc − pᵀc + λ‖c‖₁` for sparse grid coefficients `(index, value)`.
pub fn lasso_objective(op: &MomentOperator, b: &MomentVector, c: &[(usize, f64)], lambda: f64) -> Result<f64> {
    let p = op.weighted_adjoint(b)?;
    let (quad, lin) = quad_lin(op, &p, c);
    Ok(0.5 * quad - lin + lambda * c.iter().map(|(_, v)| v.abs()).sum::<f64>())
}
