//! Riesz energies of the uniform measure on the unit ball and disk from the
//! pair-distance distribution.

use crate::quad::adaptive_simpson_split;

/// `int int |x - y|^{-s} dmu(x) dmu(y)` for `mu` uniform on the unit ball
/// (`d = 3`) or unit disk (`d = 2`), `0 < s < d`. Returns `NaN` otherwise.
pub fn ball_riesz_oracle(d: usize, s: f64) -> f64 {
    if !(s >= 0.0 && s < d as f64) {
        return f64::NAN;
    }
    match d {
        // pair-distance density 3 r^2 (1 - 3r/4 + r^3/16) on [0, 2]
        3 => {
            let m = |p: f64| 2f64.powf(p) / p;
            3.0 * (m(3.0 - s) - 0.75 * m(4.0 - s) + m(6.0 - s) / 16.0)
        }
        // pair-distance density (4r/pi) (acos(r/2) - (r/2) sqrt(1 - r^2/4))
        2 => {
            // r = 2 v^{1/(2-s)} absorbs the r^{1-s} endpoint behaviour
            let e = 1.0 / (2.0 - s);
            let g = |v: f64| {
                let r = 2.0 * v.powf(e);
                let h = 0.5 * r;
                let w = 4.0 / std::f64::consts::PI * (h.min(1.0).acos() - h * (1.0 - h * h).max(0.0).sqrt());
                // r^{1-s} dr = 2^{2-s} e dv
                w * 2f64.powf(2.0 - s) * e
            };
            adaptive_simpson_split(&g, 0.0, 1.0, 64, 1e-13)
        }
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_energy_of_ball() {
        assert!((ball_riesz_oracle(3, 1.0) - 1.2).abs() < 1e-14);
    }

    #[test]
    fn zero_exponent_gives_unit_mass() {
        assert!((ball_riesz_oracle(3, 0.0) - 1.0).abs() < 1e-14);
        assert!((ball_riesz_oracle(2, 0.0) - 1.0).abs() < 1e-9);
        assert!((ball_riesz_oracle(3, 1e-6) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn monotone_in_exponent() {
        for d in [2usize, 3] {
            let mut prev = 0.0;
            for k in 1..=15 {
                let v = ball_riesz_oracle(d, 0.1 * k as f64);
                assert!(v > prev, "d={d} s={}", 0.1 * k as f64);
                prev = v;
            }
        }
    }

    #[test]
    fn disk_log_free_check() {
        // mean distance between two uniform points of the unit disk is 128/(45 pi)
        let mean = ball_riesz_oracle_moment(2, 1.0);
        assert!((mean - 128.0 / (45.0 * std::f64::consts::PI)).abs() < 1e-9);
    }

    fn ball_riesz_oracle_moment(d: usize, m: f64) -> f64 {
        assert_eq!(d, 2);
        let g = |r: f64| {
            let h = 0.5 * r;
            4.0 * r / std::f64::consts::PI * (h.acos() - h * (1.0 - h * h).max(0.0).sqrt()) * r.powf(m)
        };
        adaptive_simpson_split(&g, 0.0, 2.0, 64, 1e-13)
    }
}
