//! Experiment configurations and their validation.

use crate::quad::integrate_adaptive;
use crate::{norm, Error, Point, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

/// Packing fractions above this make dart throwing impractical.
pub const PACKING_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackgroundKind {
    Free,
    Harmonic,
}

/// `H_0 = -Delta` or `H_0 = -Delta + omega^2 |x|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub kind: BackgroundKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub omega: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Background {
    pub fn free() -> Self {
        Self {
            kind: BackgroundKind::Free,
            omega: 0.0,
        }
    }

    pub fn harmonic(omega: f64) -> Self {
        Self {
            kind: BackgroundKind::Harmonic,
            omega,
        }
    }

    /// Infimum of the spectrum of `H_0` in dimension `d`.
    pub fn spectral_bottom(&self, d: usize) -> f64 {
        match self.kind {
            BackgroundKind::Free => 0.0,
            BackgroundKind::Harmonic => d as f64 * self.omega,
        }
    }

    /// Background potential `V(x)`.
    pub fn potential(&self, x: &Point) -> f64 {
        match self.kind {
            BackgroundKind::Free => 0.0,
            BackgroundKind::Harmonic => {
                let r = norm(x);
                self.omega * self.omega * r * r
            }
        }
    }
}

/// Axis-aligned cell of a piecewise-constant density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    fn volume(&self, d: usize) -> f64 {
        (0..d).map(|k| (self.hi[k] - self.lo[k]).max(0.0)).product()
    }

    fn contains(&self, d: usize, x: &Point) -> bool {
        (0..d).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }
}

/// Limit density `U`; normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", deny_unknown_fields)]
pub enum DensitySpec {
    UniformBall { radius: f64 },
    UniformBox { halfwidths: Vec<f64> },
    PiecewiseConstant { cells: Vec<Cell>, values: Vec<f64> },
}

/// A convex piece of the support carrying a constant density value.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ball { radius: f64 },
    Box { lo: Point, hi: Point },
}

impl Region {
    /// Parameter interval `{r >= 0 : x + r w in region}` for a unit `w`.
    pub fn ray_interval(&self, d: usize, x: &Point, w: &Point) -> Option<(f64, f64)> {
        match self {
            Region::Ball { radius } => {
                let b: f64 = (0..d).map(|k| x[k] * w[k]).sum();
                let c: f64 = (0..d).map(|k| x[k] * x[k]).sum::<f64>() - radius * radius;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // roots of t^2 + 2 b t + c, each from its cancellation-free form
                let (lo, hi) = if b > 0.0 {
                    let t = -b - sq;
                    (t, c / t)
                } else {
                    let t = -b + sq;
                    (c / t, t)
                };
                if hi <= 0.0 {
                    return None;
                }
                Some((lo.max(0.0), hi))
            }
            Region::Box { lo, hi } => {
                let mut t0: f64 = 0.0;
                let mut t1: f64 = f64::INFINITY;
                for k in 0..d {
                    if w[k].abs() < 1e-300 {
                        if x[k] < lo[k] || x[k] > hi[k] {
                            return None;
                        }
                        continue;
                    }
                    let a = (lo[k] - x[k]) / w[k];
                    let b = (hi[k] - x[k]) / w[k];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t1 > t0 {
                    Some((t0, t1))
                } else {
                    None
                }
            }
        }
    }
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

impl DensitySpec {
    /// Measure of the support in dimension `d`.
    pub fn support_volume(&self, d: usize) -> f64 {
        match self {
            DensitySpec::UniformBall { radius } => unit_ball_volume(d) * radius.powi(d as i32),
            DensitySpec::UniformBox { halfwidths } => halfwidths.iter().take(d).map(|h| 2.0 * h).product(),
            DensitySpec::PiecewiseConstant { cells, values } => cells
                .iter()
                .zip(values)
                .filter(|(_, v)| **v > 0.0)
                .map(|(c, _)| c.volume(d))
                .sum(),
        }
    }

    fn piecewise_mass(cells: &[Cell], values: &[f64], d: usize) -> f64 {
        cells.iter().zip(values).map(|(c, v)| c.volume(d) * v).sum()
    }

    /// `U(x)`; zero outside the support.
    pub fn eval(&self, d: usize, x: &Point) -> f64 {
        match self {
            DensitySpec::UniformBall { radius } => {
                if norm(x) <= *radius {
                    1.0 / self.support_volume(d)
                } else {
                    0.0
                }
            }
            DensitySpec::UniformBox { halfwidths } => {
                if (0..d).all(|k| x[k].abs() <= halfwidths[k]) {
                    1.0 / self.support_volume(d)
                } else {
                    0.0
                }
            }
            DensitySpec::PiecewiseConstant { cells, values } => {
                let mass = Self::piecewise_mass(cells, values, d);
                cells
                    .iter()
                    .zip(values)
                    .find(|(c, _)| c.contains(d, x))
                    .map(|(_, v)| v / mass)
                    .unwrap_or(0.0)
            }
        }
    }

    /// Whether `x` lies in the closed support.
    pub fn contains(&self, d: usize, x: &Point) -> bool {
        match self {
            DensitySpec::UniformBall { radius } => norm(x) <= *radius,
            DensitySpec::UniformBox { halfwidths } => (0..d).all(|k| x[k].abs() <= halfwidths[k]),
            DensitySpec::PiecewiseConstant { cells, values } => cells
                .iter()
                .zip(values)
                .any(|(c, v)| *v > 0.0 && c.contains(d, x)),
        }
    }

    /// Smallest axis-aligned box containing the support.
    pub fn bounding_box(&self, d: usize) -> (Point, Point) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        match self {
            DensitySpec::UniformBall { radius } => {
                for k in 0..d {
                    lo[k] = -radius;
                    hi[k] = *radius;
                }
            }
            DensitySpec::UniformBox { halfwidths } => {
                for k in 0..d {
                    lo[k] = -halfwidths[k];
                    hi[k] = halfwidths[k];
                }
            }
            DensitySpec::PiecewiseConstant { cells, values } => {
                for k in 0..d {
                    lo[k] = f64::INFINITY;
                    hi[k] = f64::NEG_INFINITY;
                }
                for (c, v) in cells.iter().zip(values) {
                    if *v > 0.0 {
                        for k in 0..d {
                            lo[k] = lo[k].min(c.lo[k]);
                            hi[k] = hi[k].max(c.hi[k]);
                        }
                    }
                }
            }
        }
        (lo, hi)
    }

    /// `max |x|` over the support.
    pub fn support_radius(&self, d: usize) -> f64 {
        match self {
            DensitySpec::UniformBall { radius } => *radius,
            _ => {
                let (lo, hi) = self.bounding_box(d);
                (0..d).map(|k| lo[k].abs().max(hi[k].abs()).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    /// Largest value of `U`.
    pub fn max_density(&self, d: usize) -> f64 {
        match self {
            DensitySpec::PiecewiseConstant { cells, values } => {
                let mass = Self::piecewise_mass(cells, values, d);
                values.iter().cloned().fold(0.0, f64::max) / mass
            }
            _ => 1.0 / self.support_volume(d),
        }
    }

    /// Convex pieces of the support with their density values.
    pub fn regions(&self, d: usize) -> Vec<(Region, f64)> {
        match self {
            DensitySpec::UniformBall { radius } => vec![(Region::Ball { radius: *radius }, self.max_density(d))],
            DensitySpec::UniformBox { .. } => {
                let (lo, hi) = self.bounding_box(d);
                vec![(Region::Box { lo, hi }, self.max_density(d))]
            }
            DensitySpec::PiecewiseConstant { cells, values } => {
                let mass = Self::piecewise_mass(cells, values, d);
                cells
                    .iter()
                    .zip(values)
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(c, v)| {
                        let mut lo = [0.0; 3];
                        let mut hi = [0.0; 3];
                        lo[..d].copy_from_slice(&c.lo[..d]);
                        hi[..d].copy_from_slice(&c.hi[..d]);
                        (Region::Box { lo, hi }, v / mass)
                    })
                    .collect()
            }
        }
    }

    /// `int f U dx` by nested adaptive Gauss–Kronrod quadrature in
    /// coordinates adapted to each region (polar/spherical for balls).
    pub fn integrate<F: Fn(&Point) -> f64>(&self, d: usize, f: F, tol: f64) -> Result<f64> {
        let mut total = 0.0;
        let regions = self.regions(d);
        let share = tol / regions.len().max(1) as f64;
        for (region, value) in &regions {
            total += value * integrate_region(region, d, &f, share / value.max(1e-300))?;
        }
        Ok(total)
    }
}

fn integrate_region<F: Fn(&Point) -> f64>(region: &Region, d: usize, f: &F, tol: f64) -> Result<f64> {
    match region {
        Region::Ball { radius } => {
            let rr = *radius;
            if d == 2 {
                integrate_adaptive(
                    |r| {
                        let inner = integrate_adaptive(
                            |phi| f(&[r * phi.cos(), r * phi.sin(), 0.0]),
                            0.0,
                            2.0 * PI,
                            tol / (10.0 * rr * rr),
                        );
                        r * inner.unwrap_or(f64::NAN)
                    },
                    0.0,
                    rr,
                    tol,
                )
            } else {
                integrate_adaptive(
                    |r| {
                        let mid = integrate_adaptive(
                            |c| {
                                let sn = (1.0 - c * c).max(0.0).sqrt();
                                let inner = integrate_adaptive(
                                    |phi| f(&[r * sn * phi.cos(), r * sn * phi.sin(), r * c]),
                                    0.0,
                                    2.0 * PI,
                                    tol / (100.0 * rr.powi(3)),
                                );
                                inner.unwrap_or(f64::NAN)
                            },
                            -1.0,
                            1.0,
                            tol / (10.0 * rr.powi(3)),
                        );
                        r * r * mid.unwrap_or(f64::NAN)
                    },
                    0.0,
                    rr,
                    tol,
                )
            }
        }
        Region::Box { lo, hi } => {
            let vol: f64 = (0..d).map(|k| hi[k] - lo[k]).product();
            integrate_box(f, d, lo, hi, [0.0; 3], 0, tol / vol.max(1e-300) * (hi[0] - lo[0]))
        }
    }
}

fn integrate_box<F: Fn(&Point) -> f64>(
    f: &F,
    d: usize,
    lo: &Point,
    hi: &Point,
    mut fixed: Point,
    axis: usize,
    tol: f64,
) -> Result<f64> {
    if axis + 1 == d {
        return integrate_adaptive(
            |t| {
                fixed[axis] = t;
                f(&fixed)
            },
            lo[axis],
            hi[axis],
            tol,
        );
    }
    let next_tol = tol / (10.0 * (hi[axis] - lo[axis])) * (hi[axis + 1] - lo[axis + 1]);
    integrate_adaptive(
        |t| {
            fixed[axis] = t;
            integrate_box(f, d, lo, hi, fixed, axis + 1, next_tol).unwrap_or(f64::NAN)
        },
        lo[axis],
        hi[axis],
        tol,
    )
}

/// Strength profile `a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", deny_unknown_fields)]
pub enum StrengthSpec {
    Constant { a0: f64 },
    AffineRadial { a0: f64, slope: f64, cutoff: f64 },
}

impl StrengthSpec {
    /// `a(x)`: `a0`, or `a0 + slope * min(|x|, cutoff)`.
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            StrengthSpec::Constant { a0 } => *a0,
            StrengthSpec::AffineRadial { a0, slope, cutoff } => a0 + slope * norm(x).min(*cutoff),
        }
    }

    /// Lower bound of `a` over a support of radius `r_max`.
    pub fn min_over(&self, r_max: f64) -> f64 {
        match self {
            StrengthSpec::Constant { a0 } => *a0,
            StrengthSpec::AffineRadial { a0, slope, cutoff } => a0.min(a0 + slope * r_max.min(*cutoff)),
        }
    }

    /// Upper bound of `a` over a support of radius `r_max`.
    pub fn max_over(&self, r_max: f64) -> f64 {
        match self {
            StrengthSpec::Constant { a0 } => *a0,
            StrengthSpec::AffineRadial { a0, slope, cutoff } => a0.max(a0 + slope * r_max.min(*cutoff)),
        }
    }
}

/// Evaluates `U(x)`.
pub fn density_eval(spec: &DensitySpec, d: usize, x: &Point) -> f64 {
    spec.eval(d, x)
}

/// Evaluates `a(x)`.
pub fn strength_eval(spec: &StrengthSpec, x: &Point) -> f64 {
    spec.eval(x)
}

/// A complete experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub d: usize,
    pub background: Background,
    pub density: DensitySpec,
    pub strength: StrengthSpec,
    /// Minimal-distance constant: pairs keep `|x_i - x_j| >= ell N^{-1/d}`.
    pub ell: f64,
    pub lambda0: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    d: usize,
    ell: f64,
    #[serde(default = "default_lambda0")]
    lambda0: f64,
    #[serde(default)]
    seed: u64,
}

fn default_lambda0() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: ScenarioSection,
    background: Background,
    density: DensitySpec,
    strength: StrengthSpec,
}

impl Scenario {
    /// Parses the TOML form; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self {
            d: file.scenario.d,
            background: file.background,
            density: file.density,
            strength: file.strength,
            ell: file.scenario.ell,
            lambda0: file.scenario.lambda0,
            seed: file.scenario.seed,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ScenarioFile {
            scenario: ScenarioSection {
                d: self.d,
                ell: self.ell,
                lambda0: self.lambda0,
                seed: self.seed,
            },
            background: self.background,
            density: self.density.clone(),
            strength: self.strength.clone(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }

    pub fn density_at(&self, x: &Point) -> f64 {
        self.density.eval(self.d, x)
    }

    pub fn strength_at(&self, x: &Point) -> f64 {
        self.strength.eval(x)
    }

    /// `kappa_d (ell/2)^d / vol(supp U)`: the volume fraction covered by the
    /// exclusion balls of a maximal cloud, independent of `N`.
    pub fn packing_fraction(&self) -> f64 {
        unit_ball_volume(self.d) * (0.5 * self.ell).powi(self.d as i32) / self.density.support_volume(self.d)
    }

    /// `V_bg(x) - U(x)/a(x)`.
    pub fn limit_potential(&self, x: &Point) -> f64 {
        let u = self.density_at(x);
        let v = self.background.potential(x);
        if u > 0.0 {
            v - u / self.strength_at(x)
        } else {
            v
        }
    }
}

/// Which hypothesis a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// Support and density of the limit measure.
    One,
    /// Minimal pairwise distance.
    Two,
    /// Strength function.
    Three,
    /// Dimension, background and reference parameter.
    Setup,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::One => write!(f, "Assumption 1"),
            Assumption::Two => write!(f, "Assumption 2"),
            Assumption::Three => write!(f, "Assumption 3"),
            Assumption::Setup => write!(f, "setup"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub assumption: Assumption,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn cites(&self, a: Assumption) -> bool {
        self.violations.iter().any(|v| v.assumption == a)
    }

    fn push(&mut self, assumption: Assumption, message: impl Into<String>) {
        self.violations.push(Violation {
            assumption,
            message: message.into(),
        });
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// Checks every scenario constraint; violations are returned as data.
pub fn validate(sc: &Scenario) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let d = sc.d;
    if d != 2 && d != 3 {
        rep.push(Assumption::Setup, format!("dimension {d} is not 2 or 3"));
        return rep;
    }
    if sc.background.kind == BackgroundKind::Harmonic && !positive(sc.background.omega) {
        rep.push(Assumption::Setup, "harmonic background needs omega > 0");
    }
    if !positive(sc.lambda0) {
        rep.push(Assumption::Setup, "lambda0 must be a positive real");
    } else if !(sc.lambda0 * sc.lambda0 > -sc.background.spectral_bottom(d)) {
        rep.push(Assumption::Setup, "lambda0^2 must exceed -spectral_bottom");
    }

    let mut density_ok = true;
    match &sc.density {
        DensitySpec::UniformBall { radius } => {
            if !positive(*radius) {
                rep.push(Assumption::One, "ball radius must be positive");
                density_ok = false;
            }
        }
        DensitySpec::UniformBox { halfwidths } => {
            if halfwidths.len() != d || !halfwidths.iter().all(|h| positive(*h)) {
                rep.push(Assumption::One, format!("box needs {d} positive halfwidths"));
                density_ok = false;
            }
        }
        DensitySpec::PiecewiseConstant { cells, values } => {
            if cells.is_empty() || cells.len() != values.len() {
                rep.push(Assumption::One, "piecewise density needs one value per cell");
                density_ok = false;
            } else {
                for (k, c) in cells.iter().enumerate() {
                    if c.lo.len() != d || c.hi.len() != d || (0..d).any(|i| !(c.hi[i] > c.lo[i])) {
                        rep.push(Assumption::One, format!("cell {k} is not a non-empty {d}-box"));
                        density_ok = false;
                    }
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    rep.push(Assumption::One, "density values must be finite and non-negative");
                    density_ok = false;
                }
                if density_ok {
                    for i in 0..cells.len() {
                        for j in (i + 1)..cells.len() {
                            let overlap: f64 = (0..d)
                                .map(|k| (cells[i].hi[k].min(cells[j].hi[k]) - cells[i].lo[k].max(cells[j].lo[k])).max(0.0))
                                .product();
                            if overlap > 0.0 {
                                rep.push(Assumption::One, format!("cells {i} and {j} overlap"));
                                density_ok = false;
                            }
                        }
                    }
                    if !positive(DensitySpec::piecewise_mass(cells, values, d)) {
                        rep.push(Assumption::One, "density has zero mass");
                        density_ok = false;
                    }
                }
            }
        }
    }

    if !positive(sc.ell) {
        rep.push(Assumption::Two, "ell must be a positive real");
    } else if density_ok {
        let frac = sc.packing_fraction();
        if frac > PACKING_LIMIT {
            rep.push(
                Assumption::Two,
                format!("packing infeasible: exclusion volume fraction {frac:.4} exceeds {PACKING_LIMIT}"),
            );
        }
    }

    let r_max = if density_ok { sc.density.support_radius(d) } else { 0.0 };
    match &sc.strength {
        StrengthSpec::Constant { a0 } => {
            if !positive(*a0) {
                rep.push(Assumption::Three, "strength a0 must be positive");
            }
        }
        StrengthSpec::AffineRadial { a0, slope, cutoff } => {
            if !positive(*a0) || !slope.is_finite() || !(*cutoff >= 0.0) || !cutoff.is_finite() {
                rep.push(Assumption::Three, "affine strength needs a0 > 0, finite slope and cutoff >= 0");
            } else if !(sc.strength.min_over(r_max) > 0.0) {
                rep.push(Assumption::Three, "strength is not positive on the support");
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ball_scenario(d: usize, a0: f64, ell: f64) -> Scenario {
        Scenario {
            d,
            background: Background::free(),
            density: DensitySpec::UniformBall { radius: 1.0 },
            strength: StrengthSpec::Constant { a0 },
            ell,
            lambda0: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn validation_examples() {
        assert!(validate(&ball_scenario(3, 1.0, 0.5)).is_empty());
        let rep = validate(&ball_scenario(3, 0.0, 0.5));
        assert!(rep.cites(Assumption::Three));
        let rep = validate(&ball_scenario(3, 1.0, 10.0));
        assert!(rep.cites(Assumption::Two));
        assert!(rep.violations[0].message.contains("packing"));
    }

    #[test]
    fn density_examples() {
        let ball = DensitySpec::UniformBall { radius: 1.0 };
        assert!((ball.eval(3, &[0.0; 3]) - 0.238_732).abs() < 1e-6);
        assert_eq!(ball.eval(3, &[2.0, 0.0, 0.0]), 0.0);
        let bx = DensitySpec::UniformBox {
            halfwidths: vec![1.0, 1.0],
        };
        assert_eq!(bx.eval(2, &[0.5, -0.5, 0.0]), 0.25);
    }

    #[test]
    fn strength_examples() {
        let c = StrengthSpec::Constant { a0: 1.0 };
        assert_eq!(c.eval(&[3.0, 4.0, 0.0]), 1.0);
        let a = StrengthSpec::AffineRadial {
            a0: 1.0,
            slope: 0.5,
            cutoff: 2.0,
        };
        assert!((a.eval(&[1.0, 0.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((a.eval(&[0.0, 5.0, 0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_bottom() {
        assert_eq!(Background::free().spectral_bottom(3), 0.0);
        assert_eq!(Background::harmonic(1.5).spectral_bottom(2), 3.0);
    }

    #[test]
    fn toml_round_trip_and_strictness() {
        let text = r#"
[scenario]
d = 3
ell = 0.5
lambda0 = 1.0
seed = 11

[background]
kind = "Harmonic"
omega = 1.0

[density]
shape = "UniformBox"
halfwidths = [1.0, 1.0, 0.5]

[strength]
form = "AffineRadial"
a0 = 1.0
slope = 0.5
cutoff = 2.0
"#;
        let sc = Scenario::from_toml_str(text).unwrap();
        assert_eq!(sc.background, Background::harmonic(1.0));
        assert_eq!(sc.seed, 11);
        let again = Scenario::from_toml_str(&sc.to_toml_string()).unwrap();
        assert_eq!(sc, again);

        let bad = text.replace("seed = 11", "seed = 11\nextra = 2");
        assert!(Scenario::from_toml_str(&bad).is_err());
        let bad = text.replace("halfwidths", "halfwidth");
        assert!(Scenario::from_toml_str(&bad).is_err());
        let bad = text.replace("cutoff = 2.0", "cutoff = 2.0\nbogus = 1");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn piecewise_density_is_normalized() {
        let spec = DensitySpec::PiecewiseConstant {
            cells: vec![
                Cell {
                    lo: vec![0.0, 0.0],
                    hi: vec![1.0, 1.0],
                },
                Cell {
                    lo: vec![1.0, 0.0],
                    hi: vec![3.0, 1.0],
                },
            ],
            values: vec![2.0, 1.0],
        };
        // masses 2 and 2: U = 0.5 on the first cell, 0.25 on the second
        assert!((spec.eval(2, &[0.5, 0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!((spec.eval(2, &[2.0, 0.5, 0.0]) - 0.25).abs() < 1e-15);
        let total = spec.integrate(2, |_| 1.0, 1e-10).unwrap();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overlapping_cells_rejected() {
        let mut sc = ball_scenario(2, 1.0, 0.5);
        sc.density = DensitySpec::PiecewiseConstant {
            cells: vec![
                Cell {
                    lo: vec![0.0, 0.0],
                    hi: vec![1.0, 1.0],
                },
                Cell {
                    lo: vec![0.5, 0.0],
                    hi: vec![2.0, 1.0],
                },
            ],
            values: vec![1.0, 1.0],
        };
        assert!(validate(&sc).cites(Assumption::One));
    }

    #[test]
    fn moments_of_ball() {
        let ball = DensitySpec::UniformBall { radius: 1.0 };
        let m = ball.integrate(3, |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2], 1e-10).unwrap();
        assert!((m - 0.6).abs() < 1e-9);
        let m = ball.integrate(2, |x| x[0] * x[0] + x[1] * x[1], 1e-10).unwrap();
        assert!((m - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ray_intervals() {
        let b = Region::Ball { radius: 1.0 };
        let (lo, hi) = b.ray_interval(3, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 1.0).abs() < 1e-15);
        let (lo, hi) = b.ray_interval(3, &[-2.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        assert!(b.ray_interval(3, &[2.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).is_none());
        // inside, heading outward off-centre
        let (lo, hi) = b.ray_interval(3, &[0.5, 0.0, 0.0], &[0.6, 0.8, 0.0]).unwrap();
        assert_eq!(lo, 0.0);
        let end = [0.5 + 0.6 * hi, 0.8 * hi, 0.0];
        assert!((crate::norm(&end) - 1.0).abs() < 1e-14);
        let bx = Region::Box {
            lo: [-1.0, -1.0, 0.0],
            hi: [1.0, 1.0, 0.0],
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (lo, hi) = bx.ray_interval(2, &[0.0; 3], &[s, s, 0.0]).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - std::f64::consts::SQRT_2).abs() < 1e-14);
    }
}
