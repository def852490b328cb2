//! Desk-scale recovery: planted moments, gridded ℓ1 fit, clustering,
//! continuous refinement and scoring against the plant.

pub mod grid;
pub mod l1;
pub mod refine;

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::filter::FilterSpec;
use crate::kernel::ZonalKernel;
use crate::rng::stream;
use crate::so3::{geodesic_distance, well_separated_support, Rotation};
use crate::wigner::{moments, MomentVector, PointMeasure};

pub use grid::{build_grid, grid_size, nearest, probe_coverage, MIN_RESOLUTION};
pub use l1::{l1_recover, lasso_objective, L1Options, L1Solution, MomentOperator};
pub use refine::{local_refine, RefineOptions, RefineStats};

pub const SUPPORT_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Spike {
    pub center: Rotation,
    pub coeff: f64,
}

pub fn spikes_of(mu: &PointMeasure) -> Vec<Spike> {
    mu.centers
        .points
        .iter()
        .zip(&mu.coeffs)
        .map(|(c, v)| Spike { center: *c, coeff: *v })
        .collect()
}

pub fn measure_of(spikes: &[Spike]) -> Result<PointMeasure> {
    PointMeasure::from_points(spikes.iter().map(|s| s.center).collect(), spikes.iter().map(|s| s.coeff).collect())
}

/// `‖moments(spikes) − b‖₂`.
pub fn moment_residual(spikes: &[Spike], b: &MomentVector) -> Result<f64> {
    if spikes.is_empty() {
        return Ok(b.norm());
    }
    let m = moments(&measure_of(spikes)?, b.degree_max)?;
    Ok(m.combine(1.0, b, -1.0)?.norm())
}

/// Unit quaternion mean with signs aligned to the first entry.
fn quaternion_mean(pts: &[(Rotation, f64)]) -> Rotation {
    let q0 = pts[0].0.to_quaternion();
    let mut acc = [0.0; 4];
    for (r, w) in pts {
        let q = r.to_quaternion();
        let s = if q.iter().zip(&q0).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for k in 0..4 {
            acc[k] += s * w * q[k];
        }
    }
    let n = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    Rotation::from_quaternion(acc.map(|v| v / n))
}

/// Entries at least `θ·max|c|`, grouped by single linkage within `radius`.
/// Neighbouring points of a net with covering radius `r` can be `2r` apart,
/// so `recover` links at twice the grid resolution.
/// Each cluster becomes one spike at the `|c|`-weighted mean with the summed coefficient.
pub fn cluster(grid: &[Rotation], coeffs: &[f64], threshold: f64, radius: f64) -> Vec<Spike> {
    let cmax = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if cmax == 0.0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..coeffs.len()).filter(|&j| coeffs[j].abs() >= threshold * cmax).collect();
    idx.sort_by(|a, b| coeffs[*b].abs().total_cmp(&coeffs[*a].abs()).then(a.cmp(b)));
    let mut label = vec![usize::MAX; idx.len()];
    let mut next = 0;
    for s in 0..idx.len() {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut stack = vec![s];
        while let Some(a) = stack.pop() {
            for b in 0..idx.len() {
                if label[b] == usize::MAX && geodesic_distance(&grid[idx[a]], &grid[idx[b]]) <= radius {
                    label[b] = next;
                    stack.push(b);
                }
            }
        }
        next += 1;
    }
    (0..next)
        .map(|l| {
            let members: Vec<(Rotation, f64)> = idx
                .iter()
                .zip(&label)
                .filter(|(_, lb)| **lb == l)
                .map(|(j, _)| (grid[*j], coeffs[*j].abs()))
                .collect();
            let coeff = idx.iter().zip(&label).filter(|(_, lb)| **lb == l).map(|(j, _)| coeffs[*j]).sum();
            Spike {
                center: quaternion_mean(&members),
                coeff,
            }
        })
        .collect()
}

const MAX_REFINE_PASSES: usize = 4;

/// Merges spikes closer than `radius` (coefficients add, the larger one keeps
/// its center) and drops those below `θ·max|c|`.
pub fn merge_and_prune(spikes: &[Spike], radius: f64, threshold: f64) -> Vec<Spike> {
    let mut order: Vec<usize> = (0..spikes.len()).collect();
    order.sort_by(|a, b| spikes[*b].coeff.abs().total_cmp(&spikes[*a].coeff.abs()).then(a.cmp(b)));
    let mut out: Vec<Spike> = Vec::new();
    for i in order {
        let s = spikes[i];
        match out.iter_mut().find(|o| geodesic_distance(&o.center, &s.center) < radius) {
            Some(o) => o.coeff += s.coeff,
            None => out.push(s),
        }
    }
    let cmax = out.iter().fold(0.0f64, |m, s| m.max(s.coeff.abs()));
    out.retain(|s| s.coeff.abs() >= threshold * cmax && s.coeff != 0.0);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Match {
    pub truth: usize,
    pub estimate: usize,
    pub truth_center: Rotation,
    pub estimate_center: Rotation,
    pub geodesic_error: f64,
    pub coefficient_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Score {
    pub match_radius: f64,
    pub matches: Vec<Match>,
    pub unmatched_truth: Vec<usize>,
    pub unmatched_estimate: Vec<usize>,
    pub max_geodesic_error: f64,
    pub max_coefficient_error: f64,
}

/// Greedy nearest-pair matching within `match_radius`.
pub fn score(truth: &[Spike], estimate: &[Spike], match_radius: f64) -> Score {
    let mut pairs = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in estimate.iter().enumerate() {
            let d = geodesic_distance(&t.center, &e.center);
            if d <= match_radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_t, mut used_e) = (vec![false; truth.len()], vec![false; estimate.len()]);
    let mut matches = Vec::new();
    for (d, i, j) in pairs {
        if !used_t[i] && !used_e[j] {
            used_t[i] = true;
            used_e[j] = true;
            matches.push(Match {
                truth: i,
                estimate: j,
                truth_center: truth[i].center,
                estimate_center: estimate[j].center,
                geodesic_error: d,
                coefficient_error: (truth[i].coeff - estimate[j].coeff).abs(),
            });
        }
    }
    matches.sort_by_key(|m| m.truth);
    Score {
        match_radius,
        max_geodesic_error: matches.iter().map(|m| m.geodesic_error).fold(0.0, f64::max),
        max_coefficient_error: matches.iter().map(|m| m.coefficient_error).fold(0.0, f64::max),
        unmatched_truth: (0..truth.len()).filter(|i| !used_t[*i]).collect(),
        unmatched_estimate: (0..estimate.len()).filter(|j| !used_e[*j]).collect(),
        matches,
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryOptions {
    /// filter smoothness for the moment weights
    pub s: usize,
    pub resolution: f64,
    pub l1: L1Options,
    pub refine: RefineOptions,
    pub threshold: f64,
}

impl RecoveryOptions {
    /// `s = 8` where `N ≥ 16` allows it, else `s = 6`.
    pub fn for_degree(n: usize) -> Self {
        RecoveryOptions {
            s: if n >= 16 { 8 } else { 6 },
            resolution: 0.3,
            l1: L1Options::default(),
            refine: RefineOptions::default(),
            threshold: SUPPORT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Recovery {
    pub grid_size: usize,
    pub l1: L1Solution,
    pub coarse: Vec<Spike>,
    pub estimate: Vec<Spike>,
    pub refine: RefineStats,
    /// refinement passes, each followed by merging and pruning
    pub refine_passes: usize,
    /// `‖moments(estimate) − b‖₂`
    pub moment_residual: f64,
}

pub fn recover(b: &MomentVector, opts: &RecoveryOptions) -> Result<Recovery> {
    let kernel = Arc::new(ZonalKernel::new(FilterSpec::new(opts.s, b.degree_max)?));
    let grid = build_grid(opts.resolution)?;
    let op = MomentOperator::new(grid, kernel.clone())?;
    let sol = l1_recover(b, &op, &opts.l1)?;
    let coarse = cluster(&op.grid, &sol.coeffs, opts.threshold, 2.0 * opts.resolution);
    let h = &kernel.spec().weights;
    let merge = std::f64::consts::PI / (2.0 * (b.degree_max + 1) as f64);
    let (mut estimate, mut refine) = local_refine(&coarse, b, h, &opts.refine)?;
    let mut passes = 1;
    while passes < MAX_REFINE_PASSES && !refine.rank_deficient {
        let pruned = merge_and_prune(&estimate, merge, opts.threshold);
        if pruned.len() == estimate.len() {
            break;
        }
        let initial = refine.initial_cost;
        (estimate, refine) = local_refine(&pruned, b, h, &opts.refine)?;
        refine.initial_cost = initial;
        passes += 1;
    }
    Ok(Recovery {
        grid_size: op.len(),
        refine_passes: passes,
        moment_residual: moment_residual(&estimate, b)?,
        l1: sol,
        coarse,
        estimate,
        refine,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryResult {
    pub truth: Vec<Spike>,
    pub recovery: Recovery,
    /// coarse clusters against the plant, radius = grid resolution
    pub coarse_score: Score,
    pub score: Score,
}

/// Plants `coeffs` on a support with separation `≥ ν/(N+1)`.
pub fn plant<R: Rng + ?Sized>(rng: &mut R, n: usize, nu: f64, coeffs: &[f64]) -> Result<PointMeasure> {
    if coeffs.is_empty() {
        return domain("at least one coefficient required");
    }
    let sup = well_separated_support(rng, coeffs.len(), nu / (n + 1) as f64, 1_000_000)?;
    PointMeasure::new(sup, coeffs.to_vec())
}

pub fn plant_and_recover(truth: &PointMeasure, n: usize, opts: &RecoveryOptions, match_radius: f64) -> Result<RecoveryResult> {
    let b = moments(truth, n)?;
    let rec = recover(&b, opts)?;
    let t = spikes_of(truth);
    Ok(RecoveryResult {
        coarse_score: score(&t, &rec.coarse, opts.resolution),
        score: score(&t, &rec.estimate, match_radius),
        truth: t,
        recovery: rec,
    })
}

/// The default coefficient cycle `+1, −2, +1, −2, …`.
pub fn default_coeffs(m: usize) -> Vec<f64> {
    (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -2.0 }).collect()
}

/// Plant from the seed's `recover/support` stream.
pub fn seeded_plant(seed: u64, n: usize, nu: f64, coeffs: &[f64]) -> Result<PointMeasure> {
    plant(&mut stream(seed, "recover/support"), n, nu, coeffs)
}
