use pointhom_oracles::{ball_riesz_oracle, bessel_integral_oracle, oscillator_green_oracle, square_well_ground_state};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bessel_decreasing(x in 0.01f64..30.0) {
        let a = bessel_integral_oracle(0, x);
        prop_assert!(a > 0.0);
        prop_assert!(bessel_integral_oracle(0, x * 1.05) < a);
        prop_assert!(bessel_integral_oracle(1, x) > a);
    }

    #[test]
    fn deeper_wells_bind_lower(v0 in 3.0f64..50.0) {
        let e = square_well_ground_state(v0, 1.0).unwrap();
        prop_assert!(e < 0.0 && e > -v0);
        prop_assert!(square_well_ground_state(v0 * 1.1, 1.0).unwrap() < e);
    }

    #[test]
    fn riesz_increasing_in_exponent(s in 0.05f64..1.4) {
        prop_assert!(ball_riesz_oracle(3, s + 0.05) > ball_riesz_oracle(3, s));
    }
}

#[test]
fn oscillator_green_symmetric_in_arguments() {
    let x = [0.3, -0.2, 0.5];
    let y = [-0.4, 0.1, 0.0];
    let a = oscillator_green_oracle(3, 1.0, 0.5, &x, &y, 4000);
    let b = oscillator_green_oracle(3, 1.0, 0.5, &y, &x, 4000);
    assert!((a - b).abs() <= 1e-12 * a.abs());
}
