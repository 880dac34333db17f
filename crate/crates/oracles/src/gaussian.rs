//! Radial reference integrals for Gaussian test functions
//! `f(x) = exp(-|x - c|^2 / (2 sigma^2))`.

use crate::quad::adaptive_simpson_split;
use std::f64::consts::PI;

fn sphere_area(d: usize) -> f64 {
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

/// `<f, (-Delta + lambda^2)^{-1} f>` from the Fourier representation
/// `int |f^(k)|^2 / (k^2 + lambda^2) dk / (2 pi)^d`.
pub fn gaussian_resolvent_form(d: usize, sigma: f64, lambda: f64) -> f64 {
    let df = d as f64;
    // f^(k) = (2 pi sigma^2)^{d/2} exp(-sigma^2 k^2 / 2)
    let amp2 = (2.0 * PI * sigma * sigma).powf(df);
    let k_max = 12.0 / sigma;
    let g = |k: f64| (-sigma * sigma * k * k).exp() / (k * k + lambda * lambda) * k.powf(df - 1.0);
    let radial = adaptive_simpson_split(&g, 0.0, k_max, 256, 1e-15);
    amp2 * sphere_area(d) * radial / (2.0 * PI).powf(df)
}

/// `||f||^2` for the centered Gaussian.
pub fn gaussian_norm_sq(d: usize, sigma: f64) -> f64 {
    (PI * sigma * sigma).powf(0.5 * d as f64)
}

/// `||grad f||^2` for the centered Gaussian.
pub fn gaussian_dirichlet(d: usize, sigma: f64) -> f64 {
    0.5 * d as f64 / (sigma * sigma) * gaussian_norm_sq(d, sigma)
}

/// `int_{|x| < R} f^2` for the centered Gaussian.
pub fn gaussian_ball_mass(d: usize, sigma: f64, radius: f64) -> f64 {
    let g = |r: f64| (-r * r / (sigma * sigma)).exp() * r.powi(d as i32 - 1);
    sphere_area(d) * adaptive_simpson_split(&g, 0.0, radius, 64, 1e-15)
}

/// Limit form `||grad f||^2 + lambda^2 ||f||^2 - c int_{|x|<R} f^2` for the
/// centered Gaussian, i.e. the shifted form of `-Delta - c 1_{|x|<R}`.
pub fn gaussian_well_form(d: usize, sigma: f64, lambda: f64, depth: f64, radius: f64) -> f64 {
    gaussian_dirichlet(d, sigma) + lambda * lambda * gaussian_norm_sq(d, sigma)
        - depth * gaussian_ball_mass(d, sigma, radius)
}

/// `int int x_1 y_1 / (4 pi |x - y|) dmu dmu` for `mu` uniform on the unit
/// ball, from the interior potential `x_1 (1/6 - r^2/10)` of the density
/// `y_1 1_ball`.
pub fn ball_dipole_coulomb() -> f64 {
    1.0 / (70.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolvent_form_limits() {
        // lambda -> infinity: <f, R f> ~ ||f||^2 / lambda^2
        let l = 1e3;
        let v = gaussian_resolvent_form(3, 0.7, l) * l * l;
        assert!((v / gaussian_norm_sq(3, 0.7) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ball_mass_full_space_limit() {
        let m = gaussian_ball_mass(3, 0.2, 5.0);
        assert!((m / gaussian_norm_sq(3, 0.2) - 1.0).abs() < 1e-12);
    }
}
