use halfline::estimates::{dual_exponent, fit_power_law, lp_norm};
use halfline::jost::solve_jost_ode;
use halfline::propagator::free_kernel;
use halfline::scattering::{scattering_matrix, KGrid, ScatteringOptions};
use halfline::{Potential, UniformGrid, WaveField, C64};
use proptest::prelude::*;

fn square_well_jost(v0: f64, a: f64, k: C64, x: f64) -> C64 {
    if x >= a {
        return (C64::i() * k * x).exp();
    }
    let q = (k * k + v0).sqrt();
    let s = q * (a - x);
    (C64::i() * k * a).exp() * (s.cos() - C64::i() * (k / q) * s.sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jost_ode_matches_square_well(v0 in 0.1f64..25.0, a in 0.25f64..2.0, kr in 0.05f64..10.0, ki in 0.0f64..3.0) {
        let p = Potential::square_well(v0, a).unwrap();
        let k = C64::new(kr, ki);
        let xs = [0.0, 0.5 * a, a, 1.5 * a];
        let sol = solve_jost_ode(&p, k, &xs).unwrap();
        for (x, f) in xs.iter().zip(&sol.f_values) {
            let e = square_well_jost(v0, a, k, *x);
            prop_assert!((f - e).norm() < 1e-7 * e.norm().max(1.0), "x={} {} vs {}", x, f, e);
        }
    }

    #[test]
    fn scattering_matrix_is_unimodular(v0 in -10.0f64..25.0, a in 0.25f64..2.0) {
        let p = Potential::square_well(v0, a).unwrap();
        let s = scattering_matrix(&p, &KGrid::new(8.0, 64).unwrap(), &ScatteringOptions::default()).unwrap();
        prop_assert!(s.unimodularity_defect() < 1e-8);
        prop_assert!(s.conjugation_defect() < 1e-8);
    }
}

proptest! {
    #[test]
    fn free_kernel_is_symmetric_and_dirichlet(t in 0.05f64..50.0, x in 0.0f64..20.0, y in 0.0f64..20.0) {
        let a = free_kernel(t, x, y).unwrap();
        let b = free_kernel(t, y, x).unwrap();
        prop_assert!((a - b).norm() < 1e-12);
        prop_assert!(free_kernel(t, 0.0, y).unwrap().norm() < 1e-12);
        prop_assert!(a.norm() <= 2.0 / (4.0 * std::f64::consts::PI * t).sqrt() + 1e-12);
    }

    #[test]
    fn power_laws_are_recovered(alpha in 0.0f64..2.0, c in 0.01f64..100.0) {
        let times: Vec<f64> = (0..=6).map(|j| f64::powi(2.0, j)).collect();
        let values: Vec<f64> = times.iter().map(|t| c * t.powf(-alpha)).collect();
        let fit = fit_power_law(&times, &values).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-10);
        prop_assert!((fit.constant / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_norms_scale_and_interpolate(c in 0.1f64..10.0, w in 0.3f64..3.0, p in 1.0f64..2.0) {
        let g = UniformGrid::covering(0.0, 30.0, 1.0 / 64.0).unwrap();
        let f = WaveField::from_real_fn(g, |x| (-(x - 10.0f64).powi(2) / (w * w)).exp());
        let cf = f.scale(C64::new(0.0, c));
        prop_assert!((lp_norm(&cf, p) / lp_norm(&f, p) - c).abs() < 1e-10 * c);
        // Holder: ||f||_2^2 <= ||f||_p ||f||_p'
        let q = dual_exponent(p);
        prop_assert!(lp_norm(&f, 2.0).powi(2) <= lp_norm(&f, p) * lp_norm(&f, q) * (1.0 + 1e-9));
    }

    #[test]
    fn dual_exponent_is_an_involution(p in 1.0001f64..50.0) {
        let q = dual_exponent(p);
        prop_assert!((1.0 / p + 1.0 / q - 1.0).abs() < 1e-12);
        prop_assert!((dual_exponent(q) - p).abs() < 1e-9 * p);
    }

    #[test]
    fn potentials_survive_json(depth in -30.0f64..30.0, width in 0.1f64..5.0) {
        let p = Potential::square_well(depth, width).unwrap();
        let back = Potential::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        for x in [0.0, 0.5 * width, width, 2.0 * width] {
            prop_assert_eq!(back.value(x), p.value(x));
        }
        prop_assert_eq!(back.support, p.support);
    }
}
