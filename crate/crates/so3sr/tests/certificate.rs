use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use proptest::prelude::*;
use so3sr::certificate::{
    check_schur_bounds, enumerate_sign_patterns, solve_certificate, verify_certificate, InterpolationSystem,
    VerifyOptions,
};
use so3sr::filter::{feasibility, FilterSpec};
use so3sr::kernel::ZonalKernel;
use so3sr::rng::stream;
use so3sr::so3::{haar_sample, numeric_x, well_separated_support, Rotation, SupportSet};
use so3sr::Error;

fn kernel(s: usize, n: usize) -> Arc<ZonalKernel> {
    Arc::new(ZonalKernel::new(FilterSpec::new(s, n).unwrap()))
}

fn support(m: usize, nu: f64, n: usize, seed: u64) -> SupportSet {
    let mut r = stream(seed, "test/support");
    well_separated_support(&mut r, m, nu / (n + 1) as f64, 200_000).unwrap()
}

#[test]
fn single_center_system_is_diagonal() {
    let k = kernel(8, 40);
    let c = SupportSet::new(vec![Rotation::rx(0.3)]).unwrap();
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let lam = -k.sigma_tilde(0.0, 2).unwrap();
    for r in 0..4 {
        for cc in 0..4 {
            let want = match (r, cc) {
                (0, 0) => 1.0,
                (r, cc) if r == cc => lam,
                _ => 0.0,
            };
            assert_eq!(sys.matrix[(r, cc)], want);
        }
    }
    let cert = sys.solve(&[1.0]).unwrap();
    assert_eq!(cert.alpha0(), &[1.0]);
    assert_eq!(cert.expansion.alpha[0], Vector3::zeros());
}

#[test]
fn two_center_value_entry_is_zonal() {
    let k = kernel(8, 40);
    let rho = 0.4;
    let c = SupportSet::new(vec![Rotation::identity(), Rotation::rz(rho)]).unwrap();
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let want = k.sigma_tilde(rho, 0).unwrap();
    assert!((sys.matrix[(0, 1)] - want).abs() < 1e-14);
    assert!((sys.matrix[(1, 0)] - want).abs() < 1e-14);
}

#[test]
fn structural_identities_hold_exactly() {
    let k = kernel(8, 40);
    let c = support(5, 36.0, 40, 3);
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let lam = -k.sigma_tilde(0.0, 2).unwrap();
    assert_eq!(sys.matrix, sys.matrix.transpose());
    for i in 0..5 {
        assert_eq!(sys.block(0, 0)[(i, i)], 1.0);
        for j in 1..4 {
            assert_eq!(sys.block(0, j)[(i, i)], 0.0);
            assert_eq!(sys.block(j, 0)[(i, i)], 0.0);
            assert_eq!(sys.block(j, j)[(i, i)], lam);
        }
    }
    for j in 1..4 {
        assert_eq!(sys.block(0, j), -sys.block(j, 0));
        assert_eq!(sys.block(0, j), sys.block(j, 0).transpose());
    }
}

#[test]
fn gradient_blocks_match_differences() {
    let k = kernel(8, 40);
    let c = support(4, 36.0, 40, 5);
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let p = &c.points;
    for r in 1..4 {
        let b = sys.block(r, 0);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let fd = numeric_x(|x| k.sigma(x, &p[j]), &p[i], r - 1, 1e-5);
                    assert!((b[(i, j)] - fd).abs() < 1e-6, "block ({r},0) entry ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn sign_flip_negates_coefficients_exactly() {
    let k = kernel(8, 40);
    let c = support(6, 36.0, 40, 11);
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let f = sys.factor().unwrap();
    let u = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    let neg: Vec<f64> = u.iter().map(|v| -v).collect();
    let a = f.solve(&u).unwrap().alpha_blocks();
    let b = f.solve(&neg).unwrap().alpha_blocks();
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in x.iter().zip(y) {
            assert_eq!(*p, -*q);
        }
    }
}

#[test]
fn far_pair_is_a_perturbed_diagonal_system() {
    let k = kernel(8, 40);
    let axis = Vector3::new(1.0, 2.0, 2.0).normalize();
    let c = SupportSet::new(vec![Rotation::identity(), Rotation::exp(&((PI - 0.1) * axis))]).unwrap();
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let f = sys.factor().unwrap();
    let u = [1.0, -1.0];
    let cert = f.solve(&u).unwrap();
    // α = (u, 0) leaves residual r = K(u, 0) − rhs, so ‖α − (u, 0)‖ ≤ ‖K⁻¹‖‖r‖
    let mut guess = DVector::zeros(8);
    guess[0] = 1.0;
    guess[1] = -1.0;
    let r = (&sys.matrix * &guess - sys.rhs(&u).unwrap()).amax();
    let inv_norm = f.inverse.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let nu = c.separation * 41.0;
    let c0 = k.spec().constants.c_off[0];
    for (a, ui) in cert.alpha0().iter().zip(&u) {
        assert!((a - ui).abs() <= inv_norm * r + 1e-15);
        assert!((a - ui).abs() <= 2.0 * c0 / nu.powi(8));
    }
}

#[test]
fn certificate_interpolates_and_matches_resummation() {
    let k = kernel(8, 40);
    let c = support(5, 36.0, 40, 17);
    let u = [1.0, -1.0, 1.0, 1.0, -1.0];
    let cert = solve_certificate(&c, &u, &k).unwrap();
    let (rv, rg) = cert.interpolation_residual();
    assert!(rv <= 1e-8 && rg <= 1e-8, "{rv} {rg}");
    let mut rng = stream(1, "test/points");
    for _ in 0..20 {
        let x = haar_sample(&mut rng);
        let mut want = 0.0;
        for (j, y) in c.points.iter().enumerate() {
            want += cert.expansion.alpha0[j] * k.sigma(&x, y) + cert.expansion.alpha[j].dot(&k.grad_y_sigma(&x, y));
        }
        assert!((cert.eval_q(&x) - want).abs() < 1e-12);
        let g = cert.eval_grad_q(&x);
        let fd = Vector3::from_fn(|i, _| numeric_x(|z| cert.eval_q(z), &x, i, 1e-5));
        assert!((g - fd).amax() < 1e-6);
    }
    assert!(cert.coefficient_check(28.0).holds);
}

#[test]
fn separation_below_pi_over_n_is_rejected() {
    let k = kernel(8, 40);
    let c = SupportSet::new(vec![Rotation::identity(), Rotation::rx(0.05)]).unwrap();
    assert!(matches!(InterpolationSystem::assemble(&c, &k), Err(Error::Domain(_))));
    let c = SupportSet::new(vec![Rotation::identity(), Rotation::rx(0.2)]).unwrap();
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    assert!(matches!(check_schur_bounds(&sys, 36.0, 28.0), Err(Error::Domain(_))));
    assert!(matches!(sys.solve(&[1.0, 0.5]), Err(Error::Domain(_))));
}

#[test]
fn feasibility_at_nu_36() {
    let (lhs, rhs) = feasibility(8, 36.0, 28.0).unwrap();
    assert!(lhs > rhs, "{lhs} {rhs}");
}

#[test]
fn single_center_schur_norms_vanish() {
    let k = kernel(8, 40);
    let c = SupportSet::new(vec![Rotation::ry(1.0)]).unwrap();
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let rep = check_schur_bounds(&sys, 36.0, 28.0).unwrap();
    for b in &rep.blocks {
        if b.name.starts_with('s') || b.name.starts_with("id") || b.name.starts_with("lam_minus") {
            assert_eq!(b.measured, 0.0, "{}", b.name);
        }
    }
    assert!(rep.all_hold);
}

#[test]
fn ten_center_schur_bounds_hold() {
    let k = kernel(8, 40);
    let c = support(10, 36.0, 40, 23);
    let sys = InterpolationSystem::assemble(&c, &k).unwrap();
    let rep = check_schur_bounds(&sys, 36.0, 28.0).unwrap();
    for b in rep.blocks.iter().chain(&rep.schur) {
        assert!(b.holds, "{} {} > {}", b.name, b.measured, b.bound);
    }
    assert!(rep.cascade_below_one && rep.feasible && rep.all_hold);
}

#[test]
fn single_center_far_max_is_kernel_at_ball_radius() {
    let k = kernel(8, 40);
    let c = SupportSet::new(vec![Rotation::rz(0.7)]).unwrap();
    let cert = solve_certificate(&c, &[1.0], &k).unwrap();
    let rep = verify_certificate(&cert, &VerifyOptions::default()).unwrap();
    let r = PI / 82.0;
    let oracle = (0..=100_000)
        .map(|i| r + (PI - r) * i as f64 / 100_000.0)
        .map(|t| k.sigma_tilde(t, 0).unwrap().abs())
        .fold(0.0, f64::max);
    assert!((rep.far_max - oracle).abs() < 1e-12, "{} {}", rep.far_max, oracle);
    assert!(rep.pass && rep.near_q_ok && rep.bands_within_ceilings);
}

#[test]
fn coarse_near_mesh_is_rejected() {
    let k = kernel(8, 40);
    let c = SupportSet::new(vec![Rotation::identity()]).unwrap();
    let cert = solve_certificate(&c, &[1.0], &k).unwrap();
    let opts = VerifyOptions {
        near_mesh: Some(PI / (4.0 * 41.0)),
        ..Default::default()
    };
    assert!(matches!(verify_certificate(&cert, &opts), Err(Error::Domain(_))));
}

#[test]
fn single_center_both_patterns_pass() {
    let k = kernel(8, 40);
    let c = SupportSet::new(vec![Rotation::identity()]).unwrap();
    let f = InterpolationSystem::assemble(&c, &k).unwrap().factor().unwrap();
    let s = enumerate_sign_patterns(&f, 256, &VerifyOptions::default()).unwrap();
    assert!(s.exhaustive);
    assert_eq!((s.tested, s.all_checks_passed), (2, 2));
}

#[test]
fn three_centers_all_patterns_pass() {
    let k = kernel(8, 40);
    let c = support(3, 36.0, 40, 31);
    let f = InterpolationSystem::assemble(&c, &k).unwrap().factor().unwrap();
    let s = enumerate_sign_patterns(&f, 256, &VerifyOptions::default()).unwrap();
    assert!(s.exhaustive);
    assert_eq!(s.tested, 8);
    for p in &s.patterns {
        assert!(p.all_checks, "{p:?}");
    }
    // cross-check one pattern against a direct solve and verification
    let u: Vec<f64> = s.patterns[5].signs.iter().map(|v| *v as f64).collect();
    let cert = f.solve(&u).unwrap();
    let rep = verify_certificate(&cert, &VerifyOptions::default()).unwrap();
    assert!((rep.far_max - s.patterns[5].far_max).abs() < 1e-12);
}

#[test]
fn twelve_centers_sampled_patterns_pass() {
    let k = kernel(8, 40);
    let c = support(12, 36.0, 40, 37);
    let f = InterpolationSystem::assemble(&c, &k).unwrap().factor().unwrap();
    let s = enumerate_sign_patterns(&f, 256, &VerifyOptions::default()).unwrap();
    assert!(!s.exhaustive);
    assert_eq!(s.tested, 256);
    let mut seen: Vec<_> = s.patterns.iter().map(|p| p.signs.clone()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 256);
    assert_eq!(s.all_checks_passed, 256, "worst far max {}", s.worst_far_max);
}

#[test]
fn verification_is_deterministic() {
    let k = kernel(8, 40);
    let c = support(4, 36.0, 40, 41);
    let cert = solve_certificate(&c, &[1.0, -1.0, 1.0, -1.0], &k).unwrap();
    let a = serde_json::to_string(&verify_certificate(&cert, &VerifyOptions::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&verify_certificate(&cert, &VerifyOptions::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_in_signs_and_anchored(seed in 0u64..1000, bits in 0u32..64) {
        let k = kernel(8, 40);
        let c = support(6, 36.0, 40, seed);
        let f = InterpolationSystem::assemble(&c, &k).unwrap().factor().unwrap();
        let u: Vec<f64> = (0..6).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let a = f.solve(&u).unwrap();
        let b = f.solve(&neg).unwrap();
        for (x, y) in a.alpha_blocks().iter().zip(&b.alpha_blocks()) {
            for (p, q) in x.iter().zip(y) {
                prop_assert_eq!(*p, -*q);
            }
        }
        let chk = a.coefficient_check(28.0);
        prop_assert!(chk.holds, "{:?}", chk);
    }

    #[test]
    fn cascade_below_one_implies_bounded_solution(seed in 0u64..1000, m in 2usize..=8) {
        let k = kernel(8, 40);
        let c = support(m, 36.0, 40, seed);
        let sys = InterpolationSystem::assemble(&c, &k).unwrap();
        let rep = check_schur_bounds(&sys, 36.0, 28.0).unwrap();
        if rep.cascade_below_one {
            let u = vec![1.0; m];
            let cert = sys.solve(&u).unwrap();
            prop_assert!(cert.coefficient_check(28.0).holds);
        }
    }
}
