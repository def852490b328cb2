//! Covering nets of SO(3) on Euler angles.
//!
//! With `u = (α+γ)/2`, `v = (α−γ)/2` the metric is
//! `ds² = dβ² + 4cos²(β/2) du² + 4sin²(β/2) dv²`. Each β band gets its own
//! u/v spacing so that every coordinate offset contributes at most
//! `e = 0.9·r/√3` to the distance. `v ∈ [0, π)` and `(u, v + π) ≡ (u + π, v)`,
//! so an even u count keeps the net periodic.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::so3::{geodesic_distance, haar_sample, rotation_from_euler, Rotation};

pub const MIN_RESOLUTION: f64 = PI / 256.0;
const SAFETY: f64 = 0.9;

/// `(β, n_u, n_v)` per band.
fn layout(resolution: f64) -> Vec<(f64, usize, usize)> {
    let e = SAFETY * resolution / 3f64.sqrt();
    let nb = (PI / (2.0 * e)).ceil().max(1.0) as usize;
    let db = PI / nb as f64;
    (0..nb)
        .map(|i| {
            let beta = (i as f64 + 0.5) * db;
            let c = ((beta - 0.5 * db) / 2.0).cos();
            let s = ((beta + 0.5 * db) / 2.0).sin();
            let mut nu = ((2.0 * PI * c / e).ceil() as usize).max(2);
            nu += nu % 2;
            let nv = ((PI * s / e).ceil() as usize).max(1);
            (beta, nu, nv)
        })
        .collect()
}

/// Number of points `build_grid` would produce.
pub fn grid_size(resolution: f64) -> usize {
    layout(resolution).iter().map(|(_, nu, nv)| nu * nv).sum()
}

/// Net with covering radius at most `resolution`.
pub fn build_grid(resolution: f64) -> Result<Vec<Rotation>> {
    if !resolution.is_finite() || resolution <= 0.0 {
        return Err(Error::Domain(format!("grid resolution {resolution} must be positive")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::Capability(format!(
            "grid resolution {resolution:.4e} below pi/256 (would need about {} points)",
            grid_size(resolution)
        )));
    }
    let mut out = Vec::with_capacity(grid_size(resolution));
    for (beta, nu, nv) in layout(resolution) {
        for a in 0..nu {
            let u = 2.0 * PI * a as f64 / nu as f64;
            for b in 0..nv {
                let v = PI * b as f64 / nv as f64;
                out.push(rotation_from_euler(u + v, beta, u - v));
            }
        }
    }
    Ok(out)
}

/// Largest distance from a Haar probe to its nearest grid point.
pub fn probe_coverage(grid: &[Rotation], probes: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, "grid/probes");
    let pts: Vec<Rotation> = (0..probes).map(|_| haar_sample(&mut rng)).collect();
    pts.iter()
        .map(|p| nearest(grid, p).1)
        .fold(0.0, f64::max)
}

/// `(index, distance)` of the grid point nearest to `x`.
pub fn nearest(grid: &[Rotation], x: &Rotation) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, g) in grid.iter().enumerate() {
        let d = geodesic_distance(g, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
