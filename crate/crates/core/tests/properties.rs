use pointhom::bessel::{bessel_k0, bessel_k1};
use pointhom::kernels::{free_green, zeta0, QuadratureSpec};
use pointhom::sampling::{sample_points, PointCloud};
use pointhom::scenario::{validate, Background, DensitySpec, Scenario, StrengthSpec};
use pointhom::table::{fmt_f64, parse_f64};
use pointhom::xi::assemble_xi;
use pointhom::{dist, norm, Point};
use proptest::prelude::*;

fn ball(d: usize, ell: f64, seed: u64) -> Scenario {
    Scenario {
        d,
        background: Background::free(),
        density: DensitySpec::UniformBall { radius: 1.0 },
        strength: StrengthSpec::Constant { a0: 0.5 },
        ell,
        lambda0: 1.0,
        seed,
    }
}

fn point3() -> impl Strategy<Value = Point> {
    prop::array::uniform3(-1.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn floats_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(parse_f64(&fmt_f64(v)).unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn bessel_positive_and_ordered(x in 1e-3f64..40.0) {
        let k0 = bessel_k0(x).unwrap();
        let k1 = bessel_k1(x).unwrap();
        prop_assert!(k0 > 0.0 && k1 > k0);
        prop_assert!(bessel_k0(x * 1.01).unwrap() < k0);
    }

    #[test]
    fn green_below_zeta0(d in 2usize..=3, lambda in 0.05f64..10.0, r in 1e-3f64..5.0) {
        let g = free_green(d, lambda, r).unwrap();
        prop_assert!(g > 0.0);
        if d == 3 {
            prop_assert!(g <= zeta0(3, r).unwrap());
        }
        prop_assert!(free_green(d, lambda, r * 1.1).unwrap() < g);
        prop_assert!(free_green(d, lambda * 1.1, r).unwrap() < g);
    }

    #[test]
    fn clouds_respect_support_and_distance(d in 2usize..=3, n in 2usize..200, seed in 0u64..1000) {
        let sc = ball(d, 0.5, seed);
        let c = sample_points(&sc, n, seed).unwrap();
        prop_assert_eq!(c.len(), n);
        prop_assert!(c.positions.iter().all(|x| norm(x) <= 1.0));
        prop_assert!(c.min_pair_distance >= 0.5 * (n as f64).powf(-1.0 / d as f64));
        prop_assert!(c.strengths.iter().all(|a| (*a - 0.5 * n as f64).abs() < 1e-12));
    }

    #[test]
    fn cloud_csv_round_trip(pts in prop::collection::vec(point3(), 1..20), alpha in -5.0f64..5.0) {
        let strengths = vec![alpha; pts.len()];
        let c = PointCloud::from_parts(3, pts, strengths, 3);
        let back = PointCloud::from_table(&c.to_table(), 3).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn xi_is_symmetric_and_decreasing_in_energy(
        pts in prop::collection::vec(point3(), 2..8),
        alpha in -0.2f64..1.0,
        e in -6.0f64..-0.5,
    ) {
        prop_assume!(pts.iter().enumerate().all(|(i, x)| pts[..i].iter().all(|y| dist(x, y) > 0.05)));
        let c = PointCloud::from_parts(3, pts.clone(), vec![alpha; pts.len()], 0);
        let q = QuadratureSpec::default();
        let bg = Background::free();
        let lo = assemble_xi(&c, &bg, -e, 1.0, &q).unwrap();
        let hi = assemble_xi(&c, &bg, -(e + 0.3), 1.0, &q).unwrap();
        prop_assert_eq!(lo.entries.transpose(), lo.entries.clone());
        for (a, b) in lo.eigenvalues().iter().zip(hi.eigenvalues()) {
            prop_assert!(*a >= b - 1e-12);
        }
    }

    #[test]
    fn packing_limit_is_reported(ell in 0.05f64..3.0) {
        let sc = ball(3, ell, 0);
        let rep = validate(&sc);
        prop_assert_eq!(rep.is_empty(), sc.packing_fraction() <= pointhom::scenario::PACKING_LIMIT);
    }
}
