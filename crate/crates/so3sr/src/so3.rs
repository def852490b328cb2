//! Rotation-group geometry: matrix/axis-angle/Euler conversions, the
//! bi-invariant metric, Haar sampling and finite-difference versions of the
//! right-translation derivatives `X_i f(x) = d/dt f(x e^{t L_i})`.
//!
//! Axis indices are zero based throughout: `0, 1, 2` stand for `X_1, X_2, X_3`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Below this angle the axis is the conventional `(0, 0, 1)`.
pub const TOL_0: f64 = 1e-7;
/// Tolerance accepted on `‖e‖ = 1` for caller supplied axes.
pub const AXIS_TOL: f64 = 1e-9;
/// Loosest orthogonality defect accepted by [`Rotation::from_matrix`] before projecting.
pub const INPUT_TOL: f64 = 1e-6;

/// Generator matrices `L_1, L_2, L_3`.
pub fn generator(i: usize) -> Matrix3<f64> {
    match i {
        0 => Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        1 => Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        2 => Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        _ => panic!("generator index {i} out of range"),
    }
}

/// Levi-Civita symbol on zero-based indices.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// The index completing `{i, j}` to `{0, 1, 2}`; `i != j`.
pub fn third_index(i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < 3 && j < 3);
    3 - i - j
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Element of SO(3) stored as a 3x3 orthogonal matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Rotation {
    m: Matrix3<f64>,
}

impl TryFrom<[[f64; 3]; 3]> for Rotation {
    type Error = Error;
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Rotation::from_matrix(m)
    }
}

impl From<Rotation> for [[f64; 3]; 3] {
    fn from(r: Rotation) -> Self {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r.m[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation { m: self.m * rhs.m }
    }
}

impl std::ops::Mul for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation { m: self.m * rhs.m }
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            m: Matrix3::identity(),
        }
    }

    /// Accepts a matrix within [`INPUT_TOL`] of SO(3) and projects it onto the
    /// group through its quaternion so the invariants hold to roundoff.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return domain("rotation matrix has non-finite entries");
        }
        let defect = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if defect > INPUT_TOL || (det - 1.0).abs() > INPUT_TOL {
            return domain(format!(
                "matrix is not a rotation (orthogonality defect {defect:.2e}, det {det:.12})"
            ));
        }
        let r = Rotation { m };
        Ok(Rotation::from_quaternion(r.to_quaternion()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Rotation {
        Rotation {
            m: self.m.transpose(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `‖mᵀm − I‖_max`.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.m.transpose() * self.m - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    pub fn rx(t: f64) -> Self {
        Self::exp_generator(0, t)
    }

    pub fn ry(t: f64) -> Self {
        Self::exp_generator(1, t)
    }

    pub fn rz(t: f64) -> Self {
        Self::exp_generator(2, t)
    }

    /// `e^{t L_i}` in closed form.
    pub fn exp_generator(i: usize, t: f64) -> Self {
        let (s, c) = t.sin_cos();
        let m = match i {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            2 => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            _ => panic!("generator index {i} out of range"),
        };
        Rotation { m }
    }

    /// `x e^{t L_i}`.
    pub fn right_translate(&self, i: usize, t: f64) -> Self {
        self * &Self::exp_generator(i, t)
    }

    /// Exponential of the rotation vector `v` (axis `v/|v|`, angle `|v|`).
    pub fn exp(v: &Vector3<f64>) -> Self {
        let th2 = v.norm_squared();
        let th = th2.sqrt();
        let (a, b) = if th < 1e-4 {
            (1.0 - th2 / 6.0 + th2 * th2 / 120.0, 0.5 - th2 / 24.0 + th2 * th2 / 720.0)
        } else {
            (th.sin() / th, (1.0 - th.cos()) / th2)
        };
        let k = skew(v);
        Rotation {
            m: Matrix3::identity() + k * a + k * k * b,
        }
    }

    /// Unit quaternion `(w, x, y, z)` with `w >= 0` (Shepperd's branch selection).
    pub fn to_quaternion(&self) -> [f64; 4] {
        let m = &self.m;
        let tr = m.trace();
        let cands = [tr, m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let mut best = 0;
        for k in 1..4 {
            if cands[k] > cands[best] {
                best = k;
            }
        }
        let mut q = match best {
            0 => {
                let w = 0.5 * (1.0 + tr).sqrt();
                let f = 0.25 / w;
                [w, (m[(2, 1)] - m[(1, 2)]) * f, (m[(0, 2)] - m[(2, 0)]) * f, (m[(1, 0)] - m[(0, 1)]) * f]
            }
            1 => {
                let x = 0.5 * (1.0 + 2.0 * m[(0, 0)] - tr).sqrt();
                let f = 0.25 / x;
                [(m[(2, 1)] - m[(1, 2)]) * f, x, (m[(0, 1)] + m[(1, 0)]) * f, (m[(0, 2)] + m[(2, 0)]) * f]
            }
            2 => {
                let y = 0.5 * (1.0 + 2.0 * m[(1, 1)] - tr).sqrt();
                let f = 0.25 / y;
                [(m[(0, 2)] - m[(2, 0)]) * f, (m[(0, 1)] + m[(1, 0)]) * f, y, (m[(1, 2)] + m[(2, 1)]) * f]
            }
            _ => {
                let z = 0.5 * (1.0 + 2.0 * m[(2, 2)] - tr).sqrt();
                let f = 0.25 / z;
                [(m[(1, 0)] - m[(0, 1)]) * f, (m[(0, 2)] + m[(2, 0)]) * f, (m[(1, 2)] + m[(2, 1)]) * f, z]
            }
        };
        if q[0] < 0.0 {
            q.iter_mut().for_each(|v| *v = -*v);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.iter_mut().for_each(|v| *v /= n);
        q
    }

    /// Rotation of a (not necessarily normalized, nonzero) quaternion `(w, x, y, z)`.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Rotation { m }
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        (*self).into()
    }

    /// Row-major 9-vector.
    pub fn to_array(&self) -> [f64; 9] {
        let mut a = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                a[3 * r + c] = self.m[(r, c)];
            }
        }
        a
    }

    pub fn from_array(a: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(a))
    }
}

/// Rotation angle and axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub e: Vector3<f64>,
    pub omega: f64,
}

/// Rodrigues formula `I cos ω + (1 − cos ω) e eᵀ + [e]_× sin ω`.
pub fn rotation_from_axis_angle(e: &Vector3<f64>, omega: f64) -> Result<Rotation> {
    let n = e.norm();
    if !n.is_finite() || (n - 1.0).abs() > AXIS_TOL {
        return domain(format!("axis must be a unit vector, |e| = {n}"));
    }
    if !(0.0..=PI).contains(&omega) {
        return domain(format!("angle {omega} outside [0, pi]"));
    }
    let e = e / n;
    let (s, c) = omega.sin_cos();
    let m = Matrix3::identity() * c + e * e.transpose() * (1.0 - c) + skew(&e) * s;
    Ok(Rotation { m })
}

/// `ω = arccos((tr − 1)/2)`, evaluated as `atan2(sin ω, cos ω)` with `sin ω`
/// taken from the antisymmetric part; identical value, better conditioned at 0 and π.
pub fn rotation_angle(m: &Matrix3<f64>) -> f64 {
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let a = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    (0.5 * a.norm()).atan2(c)
}

pub fn axis_angle_of(x: &Rotation) -> AxisAngle {
    axis_angle_of_matrix(&x.m)
}

pub(crate) fn axis_angle_of_matrix(m: &Matrix3<f64>) -> AxisAngle {
    let a = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let an = a.norm();
    let omega = (0.5 * an).atan2(c);
    if omega < TOL_0 {
        return AxisAngle {
            e: Vector3::z(),
            omega,
        };
    }
    let e = if omega <= 0.5 * PI {
        a / an
    } else {
        // e eᵀ = (sym(x) − cos ω I)/(1 − cos ω); at ω = π this is (x + I)/2.
        let sym = (m + m.transpose()) * 0.5;
        let b = (sym - Matrix3::identity() * c) / (1.0 - c);
        let mut j = 0;
        for k in 1..3 {
            if b[(k, k)] > b[(j, j)] {
                j = k;
            }
        }
        let mut e: Vector3<f64> = b.column(j).into_owned() / b[(j, j)].max(f64::MIN_POSITIVE).sqrt();
        if e.dot(&a) < 0.0 {
            e = -e;
        }
        e.normalize()
    };
    AxisAngle { e, omega }
}

/// `d(x, y) = ω(y⁻¹x)`.
pub fn geodesic_distance(x: &Rotation, y: &Rotation) -> f64 {
    rotation_angle(&(y.m.transpose() * x.m))
}

/// Euler angles of `R_Z(α) R_X(β) R_Z(γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerZXZ {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn rotation_from_euler(alpha: f64, beta: f64, gamma: f64) -> Rotation {
    &(&Rotation::rz(alpha) * &Rotation::rx(beta)) * &Rotation::rz(gamma)
}

fn wrap_2pi(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Inverse of [`rotation_from_euler`]. `γ` comes from the third row and `α`
/// from the combination `α ± γ`, which stays well conditioned at the gimbal poles.
pub fn euler_of(x: &Rotation) -> EulerZXZ {
    let m = &x.m;
    let beta = m[(2, 0)].hypot(m[(2, 1)]).atan2(m[(2, 2)]);
    let gamma = if m[(2, 0)] == 0.0 && m[(2, 1)] == 0.0 {
        0.0
    } else {
        m[(2, 0)].atan2(m[(2, 1)])
    };
    let alpha = if m[(2, 2)] >= 0.0 {
        let sum = (m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]);
        sum - gamma
    } else {
        let diff = (m[(1, 0)] + m[(0, 1)]).atan2(m[(0, 0)] - m[(1, 1)]);
        diff + gamma
    };
    EulerZXZ {
        alpha: wrap_2pi(alpha),
        beta,
        gamma: wrap_2pi(gamma),
    }
}

/// Haar-distributed rotation from a uniform unit quaternion (Shoemake).
pub fn haar_sample<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (s2, c2) = (2.0 * PI * u2).sin_cos();
    let (s3, c3) = (2.0 * PI * u3).sin_cos();
    Rotation::from_quaternion([b * c3, a * s2, a * c2, b * s3])
}

/// CDF of the rotation angle under Haar measure, `(t − sin t)/π`.
pub fn haar_angle_cdf(t: f64) -> f64 {
    (t - t.sin()) / PI
}

/// Central difference `(f(x e^{hL_i}) − f(x e^{−hL_i}))/(2h)`.
pub fn numeric_x<F: Fn(&Rotation) -> f64>(f: F, x: &Rotation, i: usize, h: f64) -> f64 {
    (f(&x.right_translate(i, h)) - f(&x.right_translate(i, -h))) / (2.0 * h)
}

/// `ρ(C)`, the minimal pairwise distance.
pub fn separation(points: &[Rotation]) -> Result<f64> {
    if points.len() < 2 {
        return domain("separation needs at least two points");
    }
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min(geodesic_distance(&points[i], &points[j]));
        }
    }
    Ok(best)
}

/// Ordered support with cached separation (`+∞` for a single point).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportSet {
    pub points: Vec<Rotation>,
    pub separation: f64,
}

impl SupportSet {
    pub fn new(points: Vec<Rotation>) -> Result<Self> {
        if points.is_empty() {
            return domain("support set must not be empty");
        }
        let separation = if points.len() == 1 {
            f64::INFINITY
        } else {
            separation(&points)?
        };
        Ok(SupportSet { points, separation })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rejection sampling of Haar draws until `m` points are pairwise `rho_min` apart.
pub fn well_separated_support<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    rho_min: f64,
    max_tries: usize,
) -> Result<SupportSet> {
    if m == 0 {
        return domain("support size must be positive");
    }
    let mut pts: Vec<Rotation> = Vec::with_capacity(m);
    let mut tries = 0;
    while pts.len() < m {
        if tries >= max_tries {
            return Err(Error::Saturation {
                achieved: pts.len(),
                requested: m,
                tries,
            });
        }
        tries += 1;
        let cand = haar_sample(rng);
        if pts.iter().all(|p| geodesic_distance(p, &cand) >= rho_min) {
            pts.push(cand);
        }
    }
    SupportSet::new(pts)
}

/// `n` nearly uniform unit vectors on the golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            Vector3::new(r * c, r * s, z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quarter_turn_about_z() {
        let r = rotation_from_axis_angle(&Vector3::z(), PI / 2.0).unwrap();
        let want = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r.matrix() - want).amax() < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let r = rotation_from_axis_angle(&Vector3::x(), 0.0).unwrap();
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(rotation_from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.3).is_err());
    }

    #[test]
    fn identity_axis_convention() {
        let aa = axis_angle_of(&Rotation::identity());
        assert_eq!(aa.omega, 0.0);
        assert_eq!(aa.e, Vector3::z());
        let aa = axis_angle_of(&Rotation::rz(PI / 2.0));
        assert!((aa.omega - PI / 2.0).abs() < 1e-15);
        assert!((aa.e - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn half_turn_axis_from_symmetric_part() {
        let e = Vector3::new(0.6, 0.0, 0.8);
        let r = rotation_from_axis_angle(&e, PI).unwrap();
        let aa = axis_angle_of(&r);
        assert!((aa.omega - PI).abs() < 1e-12);
        assert!((aa.e - e).norm() < 1e-12 || (aa.e + e).norm() < 1e-12);
    }

    #[test]
    fn euler_gimbal_round_trip() {
        for &(a, b, g) in &[(0.3, 0.0, 1.1), (2.0, PI, 0.4), (5.0, 1e-9, 6.0), (1.0, PI - 1e-9, 2.0)] {
            let x = rotation_from_euler(a, b, g);
            let e = euler_of(&x);
            let y = rotation_from_euler(e.alpha, e.beta, e.gamma);
            assert!((x.matrix() - y.matrix()).amax() < 1e-12, "{a} {b} {g}");
        }
    }

    #[test]
    fn numeric_x_reads_generator_entries() {
        let x = Rotation::identity();
        let f12 = |r: &Rotation| r.matrix()[(0, 1)];
        let f11 = |r: &Rotation| r.matrix()[(0, 0)];
        assert!((numeric_x(f12, &x, 2, 1e-4) + 1.0).abs() < 1e-8);
        assert!(numeric_x(f11, &x, 2, 1e-4).abs() < 1e-8);
        let tr = |r: &Rotation| r.trace();
        assert!(numeric_x(tr, &x, 0, 1e-4).abs() < 1e-8);
    }

    #[test]
    fn separation_of_small_sets() {
        let pts = [Rotation::identity(), Rotation::rz(1.0)];
        assert!((separation(&pts).unwrap() - 1.0).abs() < 1e-14);
        assert!(separation(&pts[..1]).is_err());
        let dup = [Rotation::rz(0.4), Rotation::rx(1.0), Rotation::rz(0.4)];
        assert_eq!(separation(&dup).unwrap(), 0.0);
    }

    #[test]
    fn antipodal_pair_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        match well_separated_support(&mut rng, 2, PI, 500) {
            Err(Error::Saturation { achieved, .. }) => assert_eq!(achieved, 1),
            Ok(s) => assert!(s.separation >= PI),
            Err(e) => panic!("{e}"),
        }
    }
}
