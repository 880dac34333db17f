//! Green functions, heat kernels and diagonal regularizations of the
//! backgrounds `-Delta` and `-Delta + w^2 |x|^2`.

use crate::bessel::{k0_unchecked, k1_unchecked};
use crate::quad::GaussLegendre;
use crate::scenario::{Background, BackgroundKind};
use crate::{dist, Error, Point, Result};
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Resolvent parameter `s = lambda^2`; the energy is `E = -s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParam {
    pub s: f64,
}

impl SpectralParam {
    pub fn from_lambda(lambda: f64) -> Self {
        Self { s: lambda * lambda }
    }

    pub fn from_energy(e: f64) -> Self {
        Self { s: -e }
    }
}

/// Controls the Laplace-transform quadrature used for the harmonic
/// background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss–Legendre points per panel on the `t = u^2` part.
    pub n_log_nodes: usize,
    /// Lower bound for the truncation time of the exponential tail.
    pub t_max: f64,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_log_nodes: 32,
            t_max: 1.0,
            abs_tol: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_log_nodes < 16 || !(self.abs_tol > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::Parameter(format!("invalid quadrature spec {self:?}")));
        }
        Ok(())
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::Domain(format!("dimension must be 2 or 3, got {d}")))
    }
}

/// Free Green function `g_0^lambda(r)`: `K_0(lambda r) / (2 pi)` in two
/// dimensions, `exp(-lambda r) / (4 pi r)` in three.
pub fn free_green(d: usize, lambda: f64, r: f64) -> Result<f64> {
    check_dim(d)?;
    if !(r > 0.0) {
        return Err(Error::Diagonal);
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(g_free(d, lambda, r))
}

#[inline]
pub(crate) fn g_free(d: usize, lambda: f64, r: f64) -> f64 {
    if d == 3 {
        (-lambda * r).exp() / (4.0 * PI * r)
    } else {
        k0_unchecked(lambda * r) / (2.0 * PI)
    }
}

/// Universal diagonal singularity `-ln(r) / (2 pi)` (d = 2) or
/// `1 / (4 pi r)` (d = 3).
pub fn zeta0(d: usize, r: f64) -> Result<f64> {
    check_dim(d)?;
    if !(r > 0.0) {
        return Err(Error::Diagonal);
    }
    Ok(zeta0_unchecked(d, r))
}

#[inline]
pub(crate) fn zeta0_unchecked(d: usize, r: f64) -> f64 {
    if d == 3 {
        1.0 / (4.0 * PI * r)
    } else {
        -r.ln() / (2.0 * PI)
    }
}

/// `lim_{r -> 0} (g_0^lambda(r) - zeta0(r))`.
pub fn free_regular_part(d: usize, lambda: f64) -> f64 {
    if d == 3 {
        -lambda / (4.0 * PI)
    } else {
        -((0.5 * lambda).ln() + EULER_GAMMA) / (2.0 * PI)
    }
}

/// Line integral `(x - y) . int_0^1 A(y + s (x - y)) ds` by `n_nodes`-point
/// Gauss–Legendre quadrature.
pub fn magnetic_phase<A>(a: A, x: &[f64], y: &[f64], n_nodes: usize) -> f64
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let gl = GaussLegendre::get(n_nodes.max(1));
    let dir: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
    let mut pt = vec![0.0; x.len()];
    gl.integrate(0.0, 1.0, |s| {
        for k in 0..pt.len() {
            pt[k] = y[k] + s * dir[k];
        }
        let av = a(&pt);
        av.iter().zip(&dir).map(|(p, q)| p * q).sum()
    })
}

/// Mehler kernel of `exp(-t (-Delta + w^2 |x|^2))` in `d` dimensions.
///
/// Written as `(w / (2 pi sinh z))^{d/2} exp(-(w/2) (|x-y|^2 / sinh z +
/// (|x|^2 + |y|^2) tanh(z/2)))` with `z = 2 w t`, which is stable for small
/// `w t` and underflows to zero instead of overflowing for large `w t`.
pub fn harmonic_heat_kernel(d: usize, omega: f64, t: f64, x: &Point, y: &Point) -> f64 {
    let z = 2.0 * omega * t;
    let r2 = {
        let r = dist(x, y);
        r * r
    };
    let q = x.iter().map(|v| v * v).sum::<f64>() + y.iter().map(|v| v * v).sum::<f64>();
    // ln sinh z without overflow
    let ln_sinh = if z > 20.0 {
        z - std::f64::consts::LN_2 + (-(-2.0 * z).exp()).ln_1p()
    } else {
        z.sinh().ln()
    };
    let inv_sinh = if z > 700.0 { 0.0 } else { 1.0 / z.sinh() };
    let ln_pref = 0.5 * d as f64 * (omega.ln() - (2.0 * PI).ln() - ln_sinh);
    let expo = -0.5 * omega * (r2 * inv_sinh + q * (0.5 * z).tanh());
    (ln_pref + expo).exp()
}

#[inline]
fn free_heat_kernel(d: usize, t: f64, r2: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5 * d as f64) * (-r2 / (4.0 * t)).exp()
}

/// `int_0^inf f(t) dt` for an integrand decaying at least like
/// `exp(-rate t)` and behaving like `t^{-1/2}` or better at zero.
fn laplace_quadrature<F: Fn(f64) -> f64>(f: F, rate: f64, q: &QuadratureSpec) -> f64 {
    let gl = GaussLegendre::get(q.n_log_nodes);
    // t = u^2 on (0, 1]
    let mut total = 0.0;
    let panels = 4;
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        total += gl.integrate(a, b, |u| 2.0 * u * f(u * u));
    }
    let t_end = q.t_max.max((10.0 / q.abs_tol).ln() / rate);
    if t_end > 1.0 {
        let tail = GaussLegendre::get(16);
        let cap = 8.0 / rate;
        let mut a = 1.0;
        while a < t_end {
            let b = (a + a.min(cap)).min(t_end);
            total += tail.integrate(a, b, &f);
            a = b;
        }
    }
    total
}

/// Evaluates the background Green function and its diagonal data at a fixed
/// spectral parameter.
#[derive(Debug, Clone, Copy)]
pub struct GreenEval {
    pub bg: Background,
    pub d: usize,
    pub s: f64,
    pub q: QuadratureSpec,
}

impl GreenEval {
    pub fn new(bg: Background, d: usize, s: f64, q: QuadratureSpec) -> Result<Self> {
        check_dim(d)?;
        q.validate()?;
        check_param(&bg, d, s)?;
        Ok(Self { bg, d, s, q })
    }

    /// `G_0(x, y)` for `x != y`; the caller guarantees distinct points.
    pub fn green(&self, x: &Point, y: &Point) -> f64 {
        let r = dist(x, y);
        match self.bg.kind {
            BackgroundKind::Free => g_free(self.d, self.s.sqrt(), r),
            BackgroundKind::Harmonic => {
                // symmetric evaluation path: order the arguments
                let (a, b) = if x <= y { (x, y) } else { (y, x) };
                self.harmonic_green(a, b, r)
            }
        }
    }

    fn harmonic_green(&self, x: &Point, y: &Point, r: f64) -> f64 {
        let w = self.bg.omega;
        let d = self.d;
        let sigma = self.s + d as f64 * w;
        let r2 = r * r;
        let diff = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            (-self.s * t).exp() * harmonic_heat_kernel(d, w, t, x, y) - (-sigma * t).exp() * free_heat_kernel(d, t, r2)
        };
        g_free(d, sigma.sqrt(), r) + laplace_quadrature(diff, sigma, &self.q)
    }

    /// `lim_{y -> x} (G_0(x, y) - zeta0(|x - y|))`.
    pub fn regular_part(&self, x: &Point) -> f64 {
        match self.bg.kind {
            BackgroundKind::Free => free_regular_part(self.d, self.s.sqrt()),
            BackgroundKind::Harmonic => {
                let w = self.bg.omega;
                let d = self.d;
                let sigma = self.s + d as f64 * w;
                let diff = |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    (-self.s * t).exp() * harmonic_heat_kernel(d, w, t, x, x) - (-sigma * t).exp() * free_heat_kernel(d, t, 0.0)
                };
                free_regular_part(d, sigma.sqrt()) + laplace_quadrature(diff, sigma, &self.q)
            }
        }
    }
}

fn check_param(bg: &Background, d: usize, s: f64) -> Result<()> {
    let bottom = bg.spectral_bottom(d);
    if !(s > -bottom) || !s.is_finite() {
        return Err(Error::Parameter(format!(
            "spectral parameter s = {s} must exceed -spectral_bottom = {}",
            -bottom
        )));
    }
    Ok(())
}

/// Green function of the background at `s`, for `x != y`.
pub fn background_green(
    bg: &Background,
    d: usize,
    sp: SpectralParam,
    x: &Point,
    y: &Point,
    q: &QuadratureSpec,
) -> Result<f64> {
    if x == y {
        return Err(Error::Diagonal);
    }
    Ok(GreenEval::new(*bg, d, sp.s, *q)?.green(x, y))
}

/// `lim_{y -> x} (G_0^{lambda_0}(y, x) - G_0^{lambda}(y, x))` with
/// `s = lambda^2`, `s0 = lambda_0^2`.
pub fn diagonal_regularization(
    bg: &Background,
    d: usize,
    s: f64,
    s0: f64,
    x: &Point,
    q: &QuadratureSpec,
) -> Result<f64> {
    check_dim(d)?;
    q.validate()?;
    check_param(bg, d, s)?;
    check_param(bg, d, s0)?;
    Ok(diag_reg_unchecked(bg, d, s, s0, x, q))
}

pub(crate) fn diag_reg_unchecked(bg: &Background, d: usize, s: f64, s0: f64, x: &Point, q: &QuadratureSpec) -> f64 {
    if s == s0 {
        return 0.0;
    }
    match bg.kind {
        BackgroundKind::Free => {
            if d == 3 {
                (s.sqrt() - s0.sqrt()) / (4.0 * PI)
            } else {
                (s / s0).ln() / (4.0 * PI)
            }
        }
        BackgroundKind::Harmonic => {
            let w = bg.omega;
            let rate = s.min(s0) + d as f64 * w;
            let f = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                ((-s0 * t).exp() - (-s * t).exp()) * harmonic_heat_kernel(d, w, t, x, x)
            };
            laplace_quadrature(f, rate, q)
        }
    }
}

/// `<G_0^lambda(., x), G_0^lambda(., y)>` for the free background with
/// `r = |x - y|`: `exp(-lambda r) / (8 pi lambda)` (d = 3) or
/// `r K_1(lambda r) / (4 pi lambda)` (d = 2, `1 / (4 pi lambda^2)` at zero).
pub fn green_l2_inner(d: usize, lambda: f64, r: f64) -> f64 {
    if d == 3 {
        (-lambda * r).exp() / (8.0 * PI * lambda)
    } else if r > 0.0 {
        r * k1_unchecked(lambda * r) / (4.0 * PI * lambda)
    } else {
        1.0 / (4.0 * PI * lambda * lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> Background {
        Background::free()
    }

    fn harmonic(w: f64) -> Background {
        Background::harmonic(w)
    }

    #[test]
    fn free_green_examples() {
        // e^{-1} / (4 pi) and K_0(1) / (2 pi)
        assert!((free_green(3, 1.0, 1.0).unwrap() - 0.029_274_915_762_159_58).abs() < 1e-16);
        assert!((free_green(2, 2.0, 0.5).unwrap() - 0.067_008_120_508_497_12).abs() < 1e-14);
        assert!(free_green(2, 1.0, 800.0).unwrap() < 1e-300);
        assert!(matches!(free_green(3, 1.0, 0.0), Err(Error::Diagonal)));
    }

    #[test]
    fn zeta0_examples() {
        assert_eq!(zeta0(2, 1.0).unwrap(), 0.0);
        assert!((zeta0(3, 0.25).unwrap() - 0.318_309_9).abs() < 1e-7);
        assert!((zeta0(3, 1.0).unwrap() - 0.079_577_5).abs() < 1e-7);
        assert!(zeta0(3, -1.0).is_err());
    }

    #[test]
    fn regular_part_is_the_limit() {
        for d in [2usize, 3] {
            let lam = 1.7;
            let r = 1e-6;
            let v = g_free(d, lam, r) - zeta0_unchecked(d, r);
            assert!((v - free_regular_part(d, lam)).abs() < 1e-5, "d={d}");
        }
    }

    #[test]
    fn magnetic_phase_examples() {
        let x = [1.0, 1.0];
        let y = [0.0, 0.0];
        assert_eq!(magnetic_phase(|_: &[f64]| vec![0.0, 0.0], &x, &y, 4), 0.0);
        let c = magnetic_phase(|_: &[f64]| vec![0.3, -2.0], &[1.0, 2.0], &[0.5, -1.0], 3);
        assert!((c - (0.5 * 0.3 - 2.0 * 3.0)).abs() < 1e-14);
        let b = 2.0;
        let landau = magnetic_phase(|p: &[f64]| vec![-b * p[1], 0.0], &x, &y, 4);
        assert!((landau + 1.0).abs() < 1e-14);
    }

    #[test]
    fn mehler_reduces_to_free_kernel() {
        let x = [0.3, -0.4, 0.2];
        let y = [-0.1, 0.5, 0.0];
        let t = 0.7;
        let r2 = dist(&x, &y).powi(2);
        for d in [2usize, 3] {
            let (xx, yy) = if d == 2 {
                ([x[0], x[1], 0.0], [y[0], y[1], 0.0])
            } else {
                (x, y)
            };
            let r2d = if d == 2 { (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) } else { r2 };
            let h = harmonic_heat_kernel(d, 1e-6, t, &xx, &yy);
            let f = free_heat_kernel(d, t, r2d);
            assert!((h - f).abs() < 1e-8, "d={d}");
        }
    }

    #[test]
    fn mehler_value_at_origin() {
        let o = [0.0; 3];
        let v = harmonic_heat_kernel(2, 1.0, 0.5, &o, &o);
        assert!((v - 1.0 / (2.0 * PI * 1f64.sinh())).abs() < 1e-15);
        assert_eq!(harmonic_heat_kernel(3, 1.0, 1e6, &o, &o), 0.0);
    }

    #[test]
    fn background_green_free_matches_closed_form() {
        let x = [0.0; 3];
        let y = [1.0, 0.0, 0.0];
        let v = background_green(&free(), 3, SpectralParam { s: 1.0 }, &x, &y, &QuadratureSpec::default()).unwrap();
        assert!((v - 0.029_274_915_762_159_58).abs() < 1e-16);
        assert!(background_green(&free(), 3, SpectralParam { s: 1.0 }, &x, &x, &QuadratureSpec::default()).is_err());
        assert!(background_green(&free(), 3, SpectralParam { s: 0.0 }, &x, &y, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn harmonic_green_rejects_below_bottom() {
        let x = [0.0; 3];
        let y = [1.0, 0.0, 0.0];
        let q = QuadratureSpec::default();
        assert!(background_green(&harmonic(1.0), 2, SpectralParam { s: -2.0 }, &x, &y, &q).is_err());
        assert!(background_green(&harmonic(1.0), 2, SpectralParam { s: -1.9 }, &x, &y, &q).is_ok());
    }

    #[test]
    fn diagonal_regularization_examples() {
        let q = QuadratureSpec::default();
        let x = [0.0; 3];
        let v3 = diagonal_regularization(&free(), 3, 4.0, 1.0, &x, &q).unwrap();
        assert!((v3 - 0.079_577_5).abs() < 1e-7);
        let e = std::f64::consts::E;
        let v2 = diagonal_regularization(&free(), 2, e * e, 1.0, &x, &q).unwrap();
        assert!((v2 - 0.159_154_9).abs() < 1e-7);
        assert_eq!(diagonal_regularization(&harmonic(1.0), 3, 2.0, 2.0, &x, &q).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_regularization_by_extrapolation() {
        // small-r difference of kernels, free d = 3, lambda = 2, lambda0 = 1
        let r = 1e-5;
        let diff = g_free(3, 1.0, r) - g_free(3, 2.0, r);
        assert!((diff - 1.0 / (4.0 * PI)).abs() < 1e-5);
    }

    #[test]
    fn harmonic_regularization_consistent_with_regular_parts() {
        let q = QuadratureSpec::default();
        let bg = harmonic(0.8);
        let x = [0.3, -0.2, 0.1];
        for d in [2usize, 3] {
            let (s, s0) = (0.5, 2.0);
            let a = GreenEval::new(bg, d, s, q).unwrap().regular_part(&x);
            let b = GreenEval::new(bg, d, s0, q).unwrap().regular_part(&x);
            let reg = diagonal_regularization(&bg, d, s, s0, &x, &q).unwrap();
            assert!((reg - (b - a)).abs() < 1e-8, "d={d}: {reg} vs {}", b - a);
        }
    }

    #[test]
    fn green_l2_inner_examples() {
        assert!((green_l2_inner(3, 1.0, 0.0) - 0.039_788_7).abs() < 1e-7);
        assert!((green_l2_inner(3, 1.0, 1.0) - 0.014_637_457_881_079_79).abs() < 1e-16);
        assert!((green_l2_inner(2, 2.0, 0.0) - 0.019_894_4).abs() < 1e-7);
        assert!((green_l2_inner(2, 2.0, 1e-6) - green_l2_inner(2, 2.0, 0.0)).abs() < 1e-9);
    }

    #[test]
    fn green_l2_inner_is_minus_s_derivative() {
        for d in [2usize, 3] {
            for &(lam, r) in &[(1.0, 0.3), (2.5, 1.0), (0.7, 2.0)] {
                let s: f64 = lam * lam;
                let h = 1e-4 * s;
                let gp = g_free(d, (s + h).sqrt(), r);
                let gm = g_free(d, (s - h).sqrt(), r);
                let deriv = -(gp - gm) / (2.0 * h);
                assert!((deriv - green_l2_inner(d, lam, r)).abs() < 1e-6, "d={d}");
            }
        }
    }
}
