//! Property tests for the structural invariants of the library.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use vvlab::decomposition::cutoff::{chi, eta, smoothstep7, theta, theta_deriv, theta_second, xi};
use vvlab::decomposition::{decompose_field, CutoffParams, DecompositionMode};
use vvlab::functionals::{area_functional, kernel, rescale_coordinates, transversal_q, tv_scalar};
use vvlab::grid::{Boundary, GridField};
use vvlab::solver::{advance_to, compute_ut, SolverConfig};
use vvlab::spectral::decompose;
use vvlab::system::builtin_system;

const MULTI: [&str; 4] = ["decoupled2", "shared_frame2", "shared_frame3", "rotating2"];

/// A state inside the box of `name`, from unit-interval coordinates.
fn state_in_box(name: &str, unit: &[f64]) -> DVector<f64> {
    let m = builtin_system(name).unwrap();
    let b = m.state_box();
    let (lo, hi) = (b.lo.clone(), b.hi.clone());
    DVector::from_fn(m.dim(), |i, _| lo[i] + unit[i] * (hi[i] - lo[i]))
}

fn small_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_eigenframe(sys in 0usize..4, unit in prop::collection::vec(0.0f64..1.0, 3)) {
        let name = MULTI[sys];
        let m = builtin_system(name).unwrap();
        let u = state_in_box(name, &unit);
        let s = decompose(&m, &u, None).unwrap();
        let (a, b) = (m.a(&u), m.b(&u));
        let scale = 1.0 + a.norm() + b.norm();
        for i in 0..m.dim() {
            let r = s.r(i);
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
            prop_assert!((&a * &r - s.lambdas[i] * &r).norm() < 1e-10 * scale);
            prop_assert!((&b * &r - s.mus[i] * &r).norm() < 1e-10 * scale);
            prop_assert!(s.mus[i] >= m.c1_claimed());
            if i > 0 {
                prop_assert!(s.lambdas[i] - s.lambdas[i - 1] >= m.c0_claimed());
            }
        }
        let id = s.p() * s.p_inv();
        prop_assert!((id - DMatrix::identity(m.dim(), m.dim())).amax() < 1e-12);
    }

    #[test]
    fn orientation_is_continued(unit in prop::collection::vec(0.0f64..1.0, 2), dir in small_vec(2)) {
        let m = builtin_system("rotating2").unwrap();
        let u = state_in_box("rotating2", &unit);
        let base = decompose(&m, &u, None).unwrap();
        let u2 = &u + DVector::from_vec(dir) * 1e-3;
        let next = decompose(&m, &u2, Some(&base)).unwrap();
        for i in 0..2 {
            prop_assert!(base.r(i).dot(&next.r(i)) > 0.99);
        }
    }

    #[test]
    fn eigenbasis_reconstruction(sys in 0usize..4, amps in prop::collection::vec(-0.08f64..0.08, 3), k in 1usize..4) {
        let name = MULTI[sys];
        let m = builtin_system(name).unwrap();
        let n = m.dim();
        let f = GridField::from_fn(-8.0, 8.0, 128, n, Boundary::Periodic, |x| {
            (0..n).map(|c| amps[c] * (k as f64 * std::f64::consts::PI * x / 8.0 + c as f64).sin()).collect()
        }).unwrap();
        let ut = compute_ut(&m, &f, 1.0);
        let c = decompose_field(&m, &f, &ut, &CutoffParams::default(), DecompositionMode::Eigenbasis).unwrap();
        prop_assert!(c.max_recon_residual() <= 1e-9);
    }

    #[test]
    fn kernel_shape(c in 0.1f64..5.0, c1 in 0.1f64..5.0, s in -10.0f64..10.0) {
        let k = kernel(s, c, c1);
        prop_assert_eq!(kernel(0.0, c, c1), 1.0 / c);
        prop_assert!(k > 0.0 && k <= 1.0 / c);
        // non-decreasing in s
        prop_assert!(kernel(s + 0.1, c, c1) >= k);
    }

    #[test]
    fn transversal_q_homogeneous(z in small_vec(40), zs in small_vec(40), a in -3.0f64..3.0) {
        let q = transversal_q(&z, &zs, 0.1, 1.0, 1.0).unwrap();
        prop_assert!(q >= 0.0);
        let za: Vec<f64> = z.iter().map(|v| a * v).collect();
        let qa = transversal_q(&za, &zs, 0.1, 1.0, 1.0).unwrap();
        prop_assert!((qa - a.abs() * q).abs() <= 1e-12 * (1.0 + q));
        // |z| enters only through its modulus
        let zn: Vec<f64> = z.iter().map(|v| -v).collect();
        prop_assert_eq!(transversal_q(&zn, &zs, 0.1, 1.0, 1.0).unwrap(), q);
    }

    #[test]
    fn area_symmetries(a in small_vec(30), b in small_vec(30), s in -2.0f64..2.0) {
        let h = 0.2;
        let ab = area_functional(&a, &b, h).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((area_functional(&b, &a, h).unwrap() - ab).abs() <= 1e-14 * (1.0 + ab));
        let parallel: Vec<f64> = a.iter().map(|v| s * v).collect();
        prop_assert!(area_functional(&a, &parallel, h).unwrap() <= 1e-14);
        // invariant under shearing b -> b + s a
        let sheared: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x + s * y).collect();
        prop_assert!((area_functional(&a, &sheared, h).unwrap() - ab).abs() <= 1e-12 * (1.0 + ab));
    }

    #[test]
    fn total_variation_properties(q in small_vec(50), p in small_vec(50), a in -3.0f64..3.0, shift in -5.0f64..5.0) {
        let tq = tv_scalar(&q);
        let scaled: Vec<f64> = q.iter().map(|v| a * v + shift).collect();
        prop_assert!((tv_scalar(&scaled) - a.abs() * tq).abs() <= 1e-12 * (1.0 + tq));
        let sum: Vec<f64> = q.iter().zip(&p).map(|(x, y)| x + y).collect();
        prop_assert!(tv_scalar(&sum) <= tq + tv_scalar(&p) + 1e-12);
        let rev: Vec<f64> = q.iter().rev().cloned().collect();
        prop_assert!((tv_scalar(&rev) - tq).abs() <= 1e-12);
    }

    #[test]
    fn cutoffs_bounded(s in -5.0f64..5.0, d in 0.01f64..0.5) {
        for v in [smoothstep7(s), eta(s), chi(s), xi(s, d)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(theta_deriv(s, d).abs() <= 1.0 + 1e-12);
        prop_assert!(theta_second(s, d).abs() <= 2.95 / d);
        prop_assert!((theta(-s, d) + theta(s, d)).abs() <= 1e-15);
        if s.abs() <= d {
            prop_assert_eq!(theta(s, d), s);
        }
        if s.abs() >= 3.0 * d {
            prop_assert_eq!(theta(s, d), 0.0);
        }
    }

    #[test]
    fn coordinate_map_norm_and_round_trip(amp in 0.0f64..0.5, k in 1usize..4, g in 0.2f64..1.0) {
        let m = 1024;
        let h = 20.0 / m as f64;
        let xs: Vec<f64> = (0..m).map(|j| -10.0 + (j as f64 + 0.5) * h).collect();
        let d: Vec<f64> = xs.iter().map(|x| 1.0 + amp * (k as f64 * x / 3.0).sin()).collect();
        let map = rescale_coordinates(&xs, h, &d, 0.1).unwrap();
        let f: Vec<f64> = xs.iter().map(|x| (-g * x * x).exp()).collect();
        let tf = map.forward(&f);
        let l1 = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>() * h;
        prop_assert!(l1(&tf) <= map.m.sqrt() * l1(&f) * (1.0 + 1e-3));
        prop_assert!(map.round_trip_error(&f) <= 1e-6);
    }

    #[test]
    fn scalar_maximum_principle(amp in 0.05f64..0.8, k in 1usize..4) {
        let m = builtin_system("burgers").unwrap();
        let mut f = GridField::from_fn(-4.0, 4.0, 128, 1, Boundary::Periodic, |x| {
            vec![amp * (k as f64 * std::f64::consts::PI * x / 4.0).sin()]
        }).unwrap();
        let (max0, mass0) = (f.max_abs(), f.values().iter().sum::<f64>());
        advance_to(&m, &mut f, &SolverConfig { conservative: true, ..Default::default() }, 0.3).unwrap();
        prop_assert!(f.max_abs() <= max0 + 1e-12);
        prop_assert!((f.values().iter().sum::<f64>() - mass0).abs() <= 1e-10);
    }
}
