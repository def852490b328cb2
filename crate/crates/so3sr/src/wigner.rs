//! Wigner D-functions `D^l_{k,m}(α,β,γ) = e^{−ikα} P^l_{k,m}(cos β) e^{−imγ}` and
//! moment vectors of point measures.
//!
//! `P^l_{k,m}(cos β) = i^{m−k} d^l_{m,k}(β)` with `d` the standard real Wigner
//! small-d matrix. The tests pin this against the Rodrigues-type derivative
//! formula by exact polynomial differentiation.

use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::so3::{euler_of, Rotation, SupportSet};

/// Largest degree supported by the evaluation routines.
pub const L_MAX: usize = 128;

fn log_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; 2 * L_MAX + 2];
        for n in 1..t.len() {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

fn check_degree(l: usize) -> Result<()> {
    if l > L_MAX {
        return Err(Error::Capability(format!("degree {l} exceeds budget {L_MAX}")));
    }
    Ok(())
}

/// `i^n`.
pub fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `d^j_{m'm}(β)` by the explicit Wigner sum. Used for seeding the recursion and as a test oracle.
pub fn wigner_d_sum(j: i64, mp: i64, m: i64, beta: f64) -> f64 {
    let lf = log_factorials();
    let f = |n: i64| lf[n as usize];
    let (sh, ch) = (0.5 * beta).sin_cos();
    let norm = 0.5 * (f(j + mp) + f(j - mp) + f(j + m) + f(j - m));
    let s_lo = 0.max(m - mp);
    let s_hi = (j + m).min(j - mp);
    let mut acc = 0.0;
    for s in s_lo..=s_hi {
        let sign = if (mp - m + s) % 2 == 0 { 1.0 } else { -1.0 };
        let lc = norm - f(j + m - s) - f(s) - f(mp - m + s) - f(j - mp - s);
        let pc = (2 * j + m - mp - 2 * s) as i32;
        let ps = (mp - m + 2 * s) as i32;
        acc += sign * lc.exp() * ch.powi(pc) * sh.powi(ps);
    }
    acc
}

/// Number of moments of degree at most `n`: `(n+1)(2n+1)(2n+3)/3`.
pub fn moment_count(n: usize) -> usize {
    (n + 1) * (2 * n + 1) * (2 * n + 3) / 3
}

/// Position of `(l, k, m)` in lexicographic order.
pub fn moment_index(l: usize, k: i64, m: i64) -> usize {
    let li = l as i64;
    let w = 2 * li + 1;
    let base = if l == 0 { 0 } else { moment_count(l - 1) };
    base + ((k + li) * w + (m + li)) as usize
}

/// Table of `d^l_{m',m}(β)` for all `l ≤ n`, stored at `moment_index(l, m', m)`.
///
/// Three-term recursion in `l` for each `(m', m)`, seeded at `l₀ = max(|m'|, |m|)`
/// where the Wigner sum has a single term.
pub fn d_table(n: usize, beta: f64) -> Result<Vec<f64>> {
    check_degree(n)?;
    let mut out = vec![0.0; moment_count(n)];
    let c = beta.cos();
    let ni = n as i64;
    for mp in -ni..=ni {
        for m in -ni..=ni {
            let l0 = mp.abs().max(m.abs());
            let mut prev2 = 0.0;
            let mut prev1 = wigner_d_sum(l0, mp, m, beta);
            out[moment_index(l0 as usize, mp, m)] = prev1;
            let (mp2, m2) = ((mp * mp) as f64, (m * m) as f64);
            for l in (l0 + 1)..=ni {
                let lf = l as f64;
                let a = lf * (2.0 * lf - 1.0) / ((lf * lf - mp2) * (lf * lf - m2)).sqrt();
                let lm1 = lf - 1.0;
                let shift = if l == 1 { 0.0 } else { (mp * m) as f64 / (lf * lm1) };
                let b = if l == 1 {
                    0.0
                } else {
                    ((lm1 * lm1 - mp2) * (lm1 * lm1 - m2)).max(0.0).sqrt() / (lm1 * (2.0 * lf - 1.0))
                };
                let cur = a * ((c - shift) * prev1 - b * prev2);
                out[moment_index(l as usize, mp, m)] = cur;
                prev2 = prev1;
                prev1 = cur;
            }
        }
    }
    Ok(out)
}

/// Matrix `[P^l_{k,m}(cos β)]`, rows `k = −l..l`, columns `m = −l..l`.
pub fn wigner_d_row(l: usize, beta: f64) -> Result<DMatrix<Complex64>> {
    check_degree(l)?;
    if !(0.0..=std::f64::consts::PI).contains(&beta) {
        return domain(format!("beta {beta} outside [0, pi]"));
    }
    let li = l as i64;
    let w = 2 * l + 1;
    let t = d_table(l, beta)?;
    Ok(DMatrix::from_fn(w, w, |r, c| {
        let (k, m) = (r as i64 - li, c as i64 - li);
        i_pow(m - k) * t[moment_index(l, m, k)]
    }))
}

/// All `D^l_{k,m}(x)` for `l ≤ n` in moment order.
pub fn wigner_all(n: usize, x: &Rotation) -> Result<Vec<Complex64>> {
    let e = euler_of(x);
    let t = d_table(n, e.beta)?;
    let ni = n as i64;
    let ea: Vec<Complex64> = (-ni..=ni).map(|k| Complex64::from_polar(1.0, -(k as f64) * e.alpha)).collect();
    let eg: Vec<Complex64> = (-ni..=ni).map(|m| Complex64::from_polar(1.0, -(m as f64) * e.gamma)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); t.len()];
    for l in 0..=n {
        let li = l as i64;
        for k in -li..=li {
            for m in -li..=li {
                let p = i_pow(m - k) * t[moment_index(l, m, k)];
                out[moment_index(l, k, m)] = ea[(k + ni) as usize] * p * eg[(m + ni) as usize];
            }
        }
    }
    Ok(out)
}

/// Single Wigner D-function value.
#[allow(non_snake_case)]
pub fn wigner_D(l: usize, k: i64, m: i64, x: &Rotation) -> Result<Complex64> {
    let li = l as i64;
    if k.abs() > li || m.abs() > li {
        return domain(format!("indices (k, m) = ({k}, {m}) out of range for l = {l}"));
    }
    check_degree(l)?;
    let e = euler_of(x);
    let d = d_table(l, e.beta)?[moment_index(l, m, k)];
    Ok(Complex64::from_polar(1.0, -(k as f64) * e.alpha) * i_pow(m - k) * d * Complex64::from_polar(1.0, -(m as f64) * e.gamma))
}

/// Full `(2l+1)×(2l+1)` matrix `D^l(x)`, rows `k`, columns `m`.
#[allow(non_snake_case)]
pub fn wigner_D_matrix(l: usize, x: &Rotation) -> Result<DMatrix<Complex64>> {
    let all = wigner_all(l, x)?;
    let li = l as i64;
    let w = 2 * l + 1;
    Ok(DMatrix::from_fn(w, w, |r, c| all[moment_index(l, r as i64 - li, c as i64 - li)]))
}

/// `Σ_{k=−l}^{l} e^{ikω} = sin((2l+1)ω/2)/sin(ω/2)`.
pub fn addition_kernel(l: usize, omega: f64) -> f64 {
    let h = 0.5 * omega;
    let s = h.sin();
    if s.abs() < 1e-300 {
        return (2 * l + 1) as f64;
    }
    ((2 * l + 1) as f64 * h).sin() / s
}

/// `μ = Σ c_i δ_{x_i}` with pairwise distinct centers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointMeasure {
    pub centers: SupportSet,
    pub coeffs: Vec<f64>,
}

impl PointMeasure {
    pub fn new(centers: SupportSet, coeffs: Vec<f64>) -> Result<Self> {
        if centers.len() != coeffs.len() {
            return domain(format!("{} centers but {} coefficients", centers.len(), coeffs.len()));
        }
        if centers.separation <= 0.0 {
            return domain("point measure centers must be pairwise distinct");
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return domain("coefficients must be finite");
        }
        Ok(PointMeasure { centers, coeffs })
    }

    pub fn from_points(points: Vec<Rotation>, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(SupportSet::new(points)?, coeffs)
    }

    pub fn tv_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Moments `⟨μ, D^l_{k,m}⟩` for `l ≤ degree_max`, lexicographic in `(l, k, m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub degree_max: usize,
    pub entries: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    l: usize,
    k: i64,
    m: i64,
    re: f64,
    im: f64,
}

impl MomentVector {
    pub fn zeros(n: usize) -> Self {
        MomentVector {
            degree_max: n,
            entries: vec![Complex64::new(0.0, 0.0); moment_count(n)],
        }
    }

    pub fn get(&self, l: usize, k: i64, m: i64) -> Complex64 {
        self.entries[moment_index(l, k, m)]
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &MomentVector, b: f64) -> Result<MomentVector> {
        if self.degree_max != other.degree_max {
            return domain("moment vectors of different degree");
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(x, y)| x * a + y * b).collect();
        Ok(MomentVector {
            degree_max: self.degree_max,
            entries,
        })
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.degree_max as i64;
        for l in 0..=n {
            for k in -l..=l {
                for m in -l..=l {
                    let z = self.get(l as usize, k, m);
                    wr.serialize(CsvRow {
                        l: l as usize,
                        k,
                        m,
                        re: z.re,
                        im: z.im,
                    })?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows: Vec<CsvRow> = rd.deserialize().collect::<std::result::Result<_, _>>()?;
        let n = rows.last().map(|r| r.l).unwrap_or(0);
        if rows.len() != moment_count(n) {
            return domain(format!("expected {} rows for degree {n}, found {}", moment_count(n), rows.len()));
        }
        let mut mv = MomentVector::zeros(n);
        for (pos, row) in rows.iter().enumerate() {
            if row.l > n || row.k.abs() > row.l as i64 || row.m.abs() > row.l as i64 || moment_index(row.l, row.k, row.m) != pos {
                return domain(format!("row {pos} ({}, {}, {}) out of lexicographic order", row.l, row.k, row.m));
            }
            mv.entries[pos] = Complex64::new(row.re, row.im);
        }
        Ok(mv)
    }
}

/// Moments of `μ` up to degree `n`.
pub fn moments(mu: &PointMeasure, n: usize) -> Result<MomentVector> {
    let mut mv = MomentVector::zeros(n);
    for (x, &c) in mu.centers.points.iter().zip(&mu.coeffs) {
        let d = wigner_all(n, x)?;
        for (e, v) in mv.entries.iter_mut().zip(&d) {
            *e += v * c;
        }
    }
    // D^0_{00} ≡ 1, so the zeroth moment is the exact coefficient sum.
    mv.entries[0] = Complex64::new(mu.coeffs.iter().sum(), 0.0);
    Ok(mv)
}
