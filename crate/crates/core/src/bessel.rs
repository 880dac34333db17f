//! Modified Bessel functions `K_0`, `K_1`.
//!
//! For `x <= 2` the ascending series (logarithmic term times `I_nu` plus a
//! digamma-weighted power series) is summed to machine precision. For
//! `x > 2` both orders come from Steed's evaluation of the continued
//! fraction for `U(nu + 1/2, 2 nu + 1, 2x)` (Thompson & Barnett), which
//! converges in a few dozen terms there.

use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `K_0(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check(x)?;
    Ok(k0_unchecked(x))
}

/// `K_1(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check(x)?;
    Ok(k1_unchecked(x))
}

fn check(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("modified Bessel K needs x > 0, got {x}")))
    }
}

#[inline]
pub(crate) fn k0_unchecked(x: f64) -> f64 {
    if x <= 2.0 {
        k0_series(x)
    } else {
        steed(x).0
    }
}

#[inline]
pub(crate) fn k1_unchecked(x: f64) -> f64 {
    if x <= 2.0 {
        k1_series(x)
    } else {
        steed(x).1
    }
}

fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let l = (0.5 * x).ln() + EULER_GAMMA;
    // sum_k q^k/(k!)^2 (H_k - (l))  with H_0 = 0
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = -l;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        let add = term * (harmonic - l);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // I_1 part and digamma part share the power q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut h_k = 0.0;
    let mut h_k1 = 1.0;
    let mut i1 = 0.0;
    let mut psi = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term *= q / (kf * (kf + 1.0));
            h_k += 1.0 / kf;
            h_k1 += 1.0 / (kf + 1.0);
        }
        i1 += term;
        let add = term * (h_k + h_k1 - 2.0 * EULER_GAMMA);
        psi += add;
        if term < 1e-18 * i1 {
            break;
        }
    }
    1.0 / x + 0.5 * x * (l * i1 - 0.5 * psi)
}

/// `(K_0(x), K_1(x))` for `x > 1` by Steed's algorithm.
fn steed(x: f64) -> (f64, f64) {
    let mut a = -0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = 1.0 + q * delta;
    for k in 2..500 {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (b + a * d);
        delta *= b * d - 1.0;
        f += delta;
        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;
        if (q * delta).abs() < 0.5 * f64::EPSILON * s.abs() {
            break;
        }
    }
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (0.5 + x - 0.25 * f) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((bessel_k0(1.0).unwrap() - 0.421_024_438_2).abs() < 1e-10);
        assert!((bessel_k1(1.0).unwrap() - 0.601_907_230_2).abs() < 1e-10);
        assert!((bessel_k0(5.0).unwrap() - 3.6911e-3).abs() < 1e-7);
        assert!((bessel_k1(5.0).unwrap() - 4.0446e-3).abs() < 1e-7);
    }

    #[test]
    fn small_argument_asymptotics() {
        for &x in &[1e-4, 1e-6, 1e-8] {
            let k0 = bessel_k0(x).unwrap();
            assert!((k0 + (0.5 * x).ln() + EULER_GAMMA).abs() < 10.0 * x * x * (-x.ln()));
            assert!((x * bessel_k1(x).unwrap() - 1.0).abs() < 10.0 * x * x * (-x.ln()));
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        let lo = k0_series(2.0);
        let hi = steed(2.0);
        assert!((lo / hi.0 - 1.0).abs() < 1e-14);
        assert!((k1_series(2.0) / hi.1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
        assert!(bessel_k0(f64::NAN).is_err());
    }
}
