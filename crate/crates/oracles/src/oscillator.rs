//! Isotropic harmonic oscillator `-Delta + w^2 |x|^2` from its Hermite
//! eigenfunctions.
//!
//! The eigenpairs are `phi_n(x) = prod_i h_{n_i}(x_i)` with normalized
//! Hermite functions `h_n` and `E_n = w (2|n| + d)`. The resolvent kernel
//! `sum_n phi_n(x) phi_n(y) / (E_n + s)` converges too slowly to be summed
//! directly, so it is Abel-summed in time: each factor
//! `sum_n h_n(x_i) h_n(y_i) exp(-w (2n + 1) t)` is truncated at `n_terms` and
//! integrated against `exp(-s t)`. Below `t_c`, where the truncation would
//! be visible, the short-time free kernel is used.

use crate::quad::adaptive_simpson;

fn hermite_functions(n_max: usize, x: f64, w: f64) -> Vec<f64> {
    let z = w.sqrt() * x;
    let mut out = vec![0.0; n_max + 1];
    out[0] = (w / std::f64::consts::PI).powf(0.25) * (-0.5 * z * z).exp();
    if n_max >= 1 {
        out[1] = std::f64::consts::SQRT_2 * z * out[0];
    }
    for n in 2..=n_max {
        let nf = n as f64;
        out[n] = (2.0 / nf).sqrt() * z * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
    }
    out
}

struct Expansion {
    w: f64,
    /// products h_n(x_i) h_n(y_i), one row per axis
    coef: Vec<Vec<f64>>,
}

impl Expansion {
    fn new(w: f64, x: &[f64], y: &[f64], n_terms: usize) -> Self {
        let coef = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| {
                let ha = hermite_functions(n_terms, a, w);
                let hb = hermite_functions(n_terms, b, w);
                ha.iter().zip(&hb).map(|(p, q)| p * q).collect()
            })
            .collect();
        Self { w, coef }
    }

    fn heat(&self, t: f64) -> f64 {
        let q = (-2.0 * self.w * t).exp();
        let base = (-self.w * t).exp();
        self.coef
            .iter()
            .map(|c| c.iter().rev().fold(0.0, |acc, &v| acc * q + v) * base)
            .product()
    }
}

/// Heat kernel `exp(-t H)(x, y)` by the truncated eigenfunction expansion.
pub fn oscillator_heat_oracle(w: f64, t: f64, x: &[f64], y: &[f64], n_terms: usize) -> f64 {
    Expansion::new(w, x, y, n_terms).heat(t)
}

/// Resolvent kernel `(H + s)^{-1}(x, y)` for `s > -d w`, `x != y`.
pub fn oscillator_green_oracle(
    d: usize,
    w: f64,
    s: f64,
    x: &[f64],
    y: &[f64],
    n_terms: usize,
) -> f64 {
    assert_eq!(x.len(), d);
    assert_eq!(y.len(), d);
    let exp = Expansion::new(w, x, y, n_terms);
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    // truncation error of the time-t series is below exp(-36)
    let t_c = 36.0 / (2.0 * w * n_terms as f64);
    let gap = s + d as f64 * w;
    let t_end = t_c + 40.0 / gap;
    let body = |t: f64| (-s * t).exp() * exp.heat(t);
    let free = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        (-s * t).exp() * (4.0 * std::f64::consts::PI * t).powf(-0.5 * d as f64) * (-r2 / (4.0 * t)).exp()
    };
    let mut total = adaptive_simpson(&free, 0.0, t_c, 1e-14);
    // geometric panels resolve both the onset and the exponential tail
    let mut a = t_c;
    let mut width = t_c;
    while a < t_end {
        let b = (a + width).min(t_end);
        total += adaptive_simpson(&body, a, b, 1e-13);
        a = b;
        width = (2.0 * width).min(1.0 / gap);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let n = 12;
        let (a, b, m) = (-12.0, 12.0, 4000);
        let h = (b - a) / m as f64;
        let mut gram = vec![vec![0.0; n + 1]; n + 1];
        for k in 0..=m {
            let x = a + k as f64 * h;
            let wgt = if k == 0 || k == m { 0.5 * h } else { h };
            let v = hermite_functions(n, x, 1.3);
            for i in 0..=n {
                for j in 0..=n {
                    gram[i][j] += wgt * v[i] * v[j];
                }
            }
        }
        for i in 0..=n {
            for j in 0..=n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ground_level_heat_trace() {
        // d = 2, w = 1, t = 1/2 at the origin: 1 / (2 pi sinh 1)
        let v = oscillator_heat_oracle(1.0, 0.5, &[0.0, 0.0], &[0.0, 0.0], 200);
        assert!((v - 0.135_427_826_3).abs() < 1e-9, "{v}");
    }

    #[test]
    fn green_is_symmetric_and_positive() {
        let x = [0.3, -0.2];
        let y = [-0.5, 0.9];
        let a = oscillator_green_oracle(2, 1.0, -1.5, &x, &y, 2000);
        let b = oscillator_green_oracle(2, 1.0, -1.5, &y, &x, 2000);
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-13);
    }
}
