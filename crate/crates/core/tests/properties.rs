//! Randomized identities of the special functions, kernel and spectrum.

use std::f64::consts::PI;

use nld::kernel::{branch_kernels, g_band, g_eval, k_eval};
use nld::quadrature::{pv_integrate, QuadratureSpec};
use nld::specfun::{bessel_k, f_nu, gamma, psi, singular_cosine_integrals};
use nld::spectrum::{bifurcation_radii, h_r, mu_k, r1};
use nld::{CosineSeries, KernelParams};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn alpha() -> impl Strategy<Value = f64> {
    0.02f64..0.98
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gamma_recurrence(x in 0.01f64..60.0) {
        prop_assert!(close(gamma(x + 1.0).unwrap(), x * gamma(x).unwrap(), 1e-13));
    }

    #[test]
    fn gamma_reflection(x in 0.001f64..0.999) {
        let lhs = gamma(x).unwrap() * gamma(1.0 - x).unwrap();
        prop_assert!(close(lhs, PI / (PI * x).sin(), 1e-12));
    }

    #[test]
    fn bessel_recurrence(nu in 0.0f64..4.0, z in 0.05f64..30.0) {
        // K_{ν+1} = K_{ν−1} + (2ν/z) K_ν
        let lhs = bessel_k(nu + 1.0, z).unwrap();
        let rhs = bessel_k(nu - 1.0, z).unwrap() + 2.0 * nu / z * bessel_k(nu, z).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn psi_decreasing(nu in 0.05f64..4.0, z in 0.0f64..20.0, dz in 1e-3f64..2.0) {
        prop_assert!(psi(nu, z + dz).unwrap() < psi(nu, z).unwrap());
    }

    #[test]
    fn f_nu_scaling(nu in 1.2f64..7.0, xi in -12.0f64..12.0, c in 0.1f64..5.0) {
        let lhs = f_nu(nu, xi, c).unwrap();
        let rhs = c.powf(1.0 - nu) * f_nu(nu, c * xi, 1.0).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
        prop_assert!(close(lhs, f_nu(nu, -xi, c).unwrap(), 1e-15));
    }

    #[test]
    fn kernel_homogeneity(a in alpha(), z1 in -5.0f64..5.0, z2 in -5.0f64..5.0, lambda in 0.01f64..100.0) {
        prop_assume!(z1.hypot(z2) > 1e-3);
        let p = KernelParams::new(a).unwrap();
        let lhs = k_eval(&p, lambda * z1, lambda * z2).unwrap();
        let rhs = lambda.powf(-2.0 - a) * k_eval(&p, z1, z2).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn g_increasing_and_odd(a in alpha(), t in 1e-3f64..10.0, v in 0.0f64..20.0, dv in 1e-6f64..5.0) {
        let p = KernelParams::new(a).unwrap();
        let g = g_eval(&p, t, v).unwrap();
        prop_assert!(g_eval(&p, t, v + dv).unwrap() > g);
        prop_assert_eq!(g_eval(&p, t, -v).unwrap(), -g);
        prop_assert_eq!(g_eval(&p, -t, v).unwrap(), g);
    }

    #[test]
    fn g_band_additive(a in alpha(), t in 1e-2f64..5.0, v1 in -10.0f64..10.0, v2 in -10.0f64..10.0, v3 in -10.0f64..10.0) {
        let p = KernelParams::new(a).unwrap();
        let sum = g_band(&p, t, v1, v2).unwrap() + g_band(&p, t, v2, v3).unwrap();
        let direct = g_band(&p, t, v1, v3).unwrap();
        let scale = g_band(&p, t, -20.0, 20.0).unwrap();
        prop_assert!((sum - direct).abs() <= 1e-13 * scale);
    }

    #[test]
    fn branch_kernel_properties(a in alpha(), c1 in -0.3f64..0.3, c2 in -0.2f64..0.2, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        prop_assume!((s - t).abs() > 1e-6);
        let p = KernelParams::new(a).unwrap();
        let u = CosineSeries::new(vec![1.0, c1, c2]);
        let (km, k0) = branch_kernels(&p, &u, s, t).unwrap();
        let amp = km * (s - t).abs().powf(2.0 + a);
        prop_assert!(amp > 0.0 && amp <= 1.0 + 1e-15);
        prop_assert!(k0 > 0.0);
        let (km_r, k0_r) = branch_kernels(&p, &u, -s, -t).unwrap();
        prop_assert!(close(km, km_r, 1e-14) && close(k0, k0_r, 1e-14));
        let flat = CosineSeries::constant(0.7);
        let (kf, _) = branch_kernels(&p, &flat, s, t).unwrap();
        prop_assert!(close(kf * (s - t).abs().powf(2.0 + a), 1.0, 1e-14));
    }

    #[test]
    fn h_r_homogeneity(a in alpha(), r in 0.05f64..20.0, lambda in 0.1f64..10.0) {
        let p = KernelParams::new(a).unwrap();
        prop_assert!(close(h_r(&p, lambda * r).unwrap(), lambda.powf(-a) * h_r(&p, r).unwrap(), 1e-13));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectrum_increasing_in_k(a in alpha(), r in 0.05f64..5.0) {
        let p = KernelParams::new(a).unwrap();
        let mus: Vec<f64> = (0..=24).map(|k| mu_k(&p, r, k).unwrap()).collect();
        prop_assert!(mus[0] < 0.0);
        prop_assert!(mus.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spectrum_increasing_in_r(a in alpha(), k in 0usize..16, r in 0.05f64..5.0, dr in 1e-3f64..1.0) {
        let p = KernelParams::new(a).unwrap();
        prop_assert!(mu_k(&p, r + dr, k).unwrap() > mu_k(&p, r, k).unwrap());
    }

    #[test]
    fn radii_scale_inversely(a in 0.05f64..0.95) {
        let p = KernelParams::new(a).unwrap();
        let radii = bifurcation_radii(&p, 10).unwrap();
        for (i, rm) in radii.radii.iter().enumerate() {
            let m = i + 1;
            prop_assert_eq!(*rm, radii.r1 / m as f64);
            prop_assert!(mu_k(&p, *rm, m).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn pv_linearity(a in alpha(), k1 in 1usize..6, k2 in 1usize..6, w in -3.0f64..3.0) {
        let spec = QuadratureSpec::new(a, 2.0 + a).with_frequency(6.0);
        let f = |t: f64| 2.0 * (0.5 * k1 as f64 * t).sin().powi(2) * t.abs().powf(-2.0 - a);
        let g = |t: f64| 2.0 * (0.5 * k2 as f64 * t).sin().powi(2) * t.abs().powf(-2.0 - a);
        let sum = pv_integrate(|t| f(t) + w * g(t), &spec).unwrap();
        let parts = pv_integrate(f, &spec).unwrap() + w * pv_integrate(g, &spec).unwrap();
        prop_assert!((sum - parts).abs() <= 1e-13 * (1.0 + w.abs()) * sum.abs().max(parts.abs()).max(1.0));
    }
}

#[test]
fn pv_refinement_converges() {
    for a in [0.1, 0.5, 0.9] {
        let c = singular_cosine_integrals(a).unwrap().c;
        for k in [1usize, 3, 8] {
            let spec = QuadratureSpec::new(a, 2.0 + a).with_frequency(k as f64);
            let f = |t: f64| 2.0 * (0.5 * k as f64 * t).sin().powi(2) * t.abs().powf(-2.0 - a);
            let coarse = pv_integrate(f, &spec).unwrap();
            let fine = pv_integrate(f, &spec.refined()).unwrap();
            let exact = c * (k as f64).powf(1.0 + a);
            assert!(
                ((coarse - exact) / exact).abs() < 1e-8,
                "α={a} k={k}: {coarse} vs {exact}"
            );
            assert!(
                ((fine - coarse) / exact).abs() < 1e-7,
                "α={a} k={k}: refinement moved {coarse} → {fine}"
            );
        }
    }
}

#[test]
fn local_term_dominates_spectrum() {
    for a in [0.2, 0.5, 0.8] {
        let p = KernelParams::new(a).unwrap();
        let c = singular_cosine_integrals(a).unwrap().c;
        let devs: Vec<f64> = (1..=10)
            .map(|j| {
                let k = 1usize << j;
                ((k as f64).powf(-1.0 - a) * mu_k(&p, 0.8, k).unwrap() - c).abs()
            })
            .collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "α={a}: {devs:?}");
        assert!(devs[9] < 1e-3 * c);
    }
}

#[test]
fn first_radius_shrinks_like_root_of_gap() {
    for a in [0.9, 0.95, 0.99, 0.995, 0.999] {
        let p = KernelParams::new(a).unwrap();
        let ratio = r1(&p).unwrap() / (1.0 - a).sqrt();
        assert!(ratio > 0.1 && ratio < 2.0, "α={a}: R₁/√(1−α) = {ratio}");
    }
}
