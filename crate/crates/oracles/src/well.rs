//! Three-dimensional spherical square well `V = -V0 1_{|x| < R}`.

/// Ground-state energy of `-Delta - V0 1_{|x|<R}` in three dimensions.
///
/// Solves the s-wave matching condition `k cot(kR) = -sqrt(V0 - k^2)` by
/// bisection on the first branch and returns `E = k^2 - V0`. `None` means the
/// well is too shallow to bind (`V0 <= (pi / 2R)^2`).
pub fn square_well_ground_state(v0: f64, r: f64) -> Option<f64> {
    let half = std::f64::consts::FRAC_PI_2 / r;
    if v0.sqrt() <= half {
        return None;
    }
    let f = |k: f64| k / (k * r).tan() + (v0 - k * k).max(0.0).sqrt();
    let mut lo = half;
    let mut hi = v0.sqrt().min(std::f64::consts::PI / r * (1.0 - 1e-15));
    if f(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    Some(k * k - v0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_four_unit_radius() {
        let e = square_well_ground_state(4.0, 1.0).unwrap();
        assert!((e + 0.407_101_483_6).abs() < 1e-9, "{e}");
    }

    #[test]
    fn shallow_well_does_not_bind() {
        let t = (std::f64::consts::FRAC_PI_2).powi(2);
        assert!(square_well_ground_state(0.99 * t, 1.0).is_none());
        assert!(square_well_ground_state(1.01 * t, 1.0).is_some());
    }

    #[test]
    fn deep_well_approaches_hard_wall() {
        // E + V0 increases towards (pi/R)^2 as the depth grows
        let mut prev = 0.0;
        for &v0 in &[10.0, 100.0, 1000.0, 10000.0] {
            let k2 = square_well_ground_state(v0, 1.0).unwrap() + v0;
            assert!(k2 > prev);
            assert!(k2 < std::f64::consts::PI.powi(2));
            prev = k2;
        }
    }
}
