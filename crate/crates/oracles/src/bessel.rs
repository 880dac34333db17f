//! Modified Bessel functions of the second kind from their integral form
//! `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt`.

/// `K_order(x)` for `order` in {0, 1} by the trapezoidal rule on the
/// cosh-integral. The integrand is entire and decays doubly exponentially,
/// so the uniform trapezoidal rule converges geometrically in the step.
///
/// Returns `NaN` for `x <= 0` or an unsupported order.
pub fn bessel_integral_oracle(order: u32, x: f64) -> f64 {
    if !(x > 0.0) || order > 1 {
        return f64::NAN;
    }
    // exp(-x (cosh t - 1)) < 1e-40 beyond t_max
    let t_max = (1.0 + 92.0 / x).acosh();
    let step = (0.25 / x.sqrt()).min(0.02);
    let n = (t_max / step).ceil() as usize;
    let h = t_max / n as f64;
    let term = |t: f64| {
        let s = (0.5 * t).sinh();
        let e = (-2.0 * x * s * s).exp();
        if order == 0 {
            e
        } else {
            e * t.cosh()
        }
    };
    let mut sum = 0.5 * term(0.0);
    for k in 1..=n {
        sum += term(k as f64 * h);
    }
    sum * h * (-x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert!((bessel_integral_oracle(0, 1.0) - 0.421_024_438_240_708_3).abs() < 1e-13);
        assert!((bessel_integral_oracle(1, 1.0) - 0.601_907_230_197_234_6).abs() < 1e-13);
    }

    #[test]
    fn derivative_identity() {
        for &x in &[0.3, 1.0, 2.5, 7.0] {
            let h = 1e-5;
            let d = (bessel_integral_oracle(0, x + h) - bessel_integral_oracle(0, x - h)) / (2.0 * h);
            let k1 = bessel_integral_oracle(1, x);
            assert!((d + k1).abs() < 1e-6 * k1.max(1e-3), "x={x}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(bessel_integral_oracle(0, 0.0).is_nan());
        assert!(bessel_integral_oracle(2, 1.0).is_nan());
    }
}
