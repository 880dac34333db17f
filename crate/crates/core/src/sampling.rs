//! Scatterer configurations obeying the support, minimal-distance and
//! strength hypotheses, and empirical-measure diagnostics.
//!
//! Random clouds use ChaCha8 seeded with the run seed; each cloud draws from
//! its own stream, numbered by `N`, so clouds of different sizes never share
//! random numbers and a cloud never depends on which other clouds were made.

use crate::scenario::{DensitySpec, Scenario};
use crate::table::{fmt_f64, parse_f64, Table};
use crate::{dist, norm, Error, Point, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;

/// `N` scatterers with their strengths `alpha_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub d: usize,
    pub positions: Vec<Point>,
    pub strengths: Vec<f64>,
    /// Smallest pairwise distance; `+inf` for fewer than two points.
    pub min_pair_distance: f64,
    pub seed: u64,
}

impl PointCloud {
    /// Builds a cloud from explicit data, recording the achieved minimal
    /// distance.
    pub fn from_parts(d: usize, positions: Vec<Point>, strengths: Vec<f64>, seed: u64) -> Self {
        assert_eq!(positions.len(), strengths.len());
        let min_pair_distance = min_pair_distance(&positions);
        Self {
            d,
            positions,
            strengths,
            min_pair_distance,
            seed,
        }
    }

    /// Positions with strengths `N a(x_j)` from the scenario.
    pub fn with_scenario_strengths(sc: &Scenario, positions: Vec<Point>, seed: u64) -> Self {
        let n = positions.len() as f64;
        let strengths = positions.iter().map(|x| n * sc.strength_at(x)).collect();
        Self::from_parts(sc.d, positions, strengths, seed)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["j".to_string()];
        for k in 1..=self.d {
            header.push(format!("x{k}"));
        }
        header.push("alpha".to_string());
        let mut t = Table::new(&header);
        for (j, (x, a)) in self.positions.iter().zip(&self.strengths).enumerate() {
            let mut row = vec![j.to_string()];
            row.extend(x[..self.d].iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(*a));
            t.push(row);
        }
        t
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_table().write(path)
    }

    pub fn from_table(t: &Table, seed: u64) -> Result<Self> {
        let d = t.header.len().checked_sub(2).filter(|d| *d == 2 || *d == 3);
        let d = d.ok_or_else(|| Error::Parse(format!("unexpected cloud header {:?}", t.header)))?;
        let mut positions = Vec::with_capacity(t.rows.len());
        let mut strengths = Vec::with_capacity(t.rows.len());
        for row in &t.rows {
            let mut x = [0.0; 3];
            for k in 0..d {
                x[k] = parse_f64(&row[1 + k])?;
            }
            positions.push(x);
            strengths.push(parse_f64(&row[1 + d])?);
        }
        Ok(Self::from_parts(d, positions, strengths, seed))
    }

    pub fn read_csv(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        Self::from_table(&Table::read(path)?, seed)
    }
}

/// Smallest pairwise distance by direct comparison.
pub fn min_pair_distance(positions: &[Point]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            m = m.min(dist(&positions[i], &positions[j]));
        }
    }
    m
}

/// Required minimal distance `ell N^{-1/d}`.
pub fn required_distance(sc: &Scenario, n: usize) -> f64 {
    sc.ell * (n as f64).powf(-1.0 / sc.d as f64)
}

type CellKey = (i64, i64, i64);

fn cell_key(x: &Point, h: f64) -> CellKey {
    (
        (x[0] / h).floor() as i64,
        (x[1] / h).floor() as i64,
        (x[2] / h).floor() as i64,
    )
}

/// Density-weighted dart throwing: candidates are drawn uniformly in the
/// bounding box of the support, thinned by `U(x) / max U`, and accepted when
/// no earlier point lies closer than `ell N^{-1/d}`. Fails after `1000 N`
/// rejected candidates.
pub fn sample_points(sc: &Scenario, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Parameter("cloud size must be positive".into()));
    }
    let d = sc.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let (lo, hi) = sc.density.bounding_box(d);
    let umax = sc.density.max_density(d);
    let uniform = !matches!(sc.density, DensitySpec::PiecewiseConstant { .. });
    let delta = if n > 1 { required_distance(sc, n) } else { 0.0 };
    let delta2 = delta * delta;
    let cell = if delta > 0.0 { delta } else { 1.0 };
    let mut grid: HashMap<CellKey, Vec<u32>> = HashMap::new();
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let budget = 1000 * n;
    let mut failures = 0usize;
    while pts.len() < n {
        if failures > budget {
            return Err(Error::Budget {
                accepted: pts.len(),
                target: n,
                failures,
            });
        }
        let mut x = [0.0; 3];
        for k in 0..d {
            x[k] = lo[k] + (hi[k] - lo[k]) * rng.gen::<f64>();
        }
        let u = sc.density.eval(d, &x);
        let keep = if uniform {
            u > 0.0
        } else {
            u > 0.0 && rng.gen::<f64>() * umax < u
        };
        if !keep {
            failures += 1;
            continue;
        }
        let key = cell_key(&x, cell);
        let mut ok = true;
        'scan: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(key.0 + dx, key.1 + dy, key.2 + dz)) {
                        for &i in list {
                            let p = &pts[i as usize];
                            let r2 = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2);
                            if r2 < delta2 {
                                ok = false;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
        if !ok {
            failures += 1;
            continue;
        }
        grid.entry(key).or_default().push(pts.len() as u32);
        pts.push(x);
    }
    Ok(PointCloud::with_scenario_strengths(sc, pts, seed))
}

fn lattice_candidates(spec: &DensitySpec, d: usize, s: f64) -> Vec<Point> {
    let mut out = Vec::new();
    match spec {
        DensitySpec::UniformBox { halfwidths } => {
            let m: Vec<usize> = (0..d).map(|k| (2.0 * halfwidths[k] / s + 1e-9).floor() as usize).collect();
            if m.iter().any(|&v| v == 0) {
                return out;
            }
            let spacing: Vec<f64> = (0..d).map(|k| 2.0 * halfwidths[k] / m[k] as f64).collect();
            let coord = |k: usize, i: usize| -halfwidths[k] + (i as f64 + 0.5) * spacing[k];
            let mz = if d == 3 { m[2] } else { 1 };
            for i in 0..m[0] {
                for j in 0..m[1] {
                    for l in 0..mz {
                        let z = if d == 3 { coord(2, l) } else { 0.0 };
                        out.push([coord(0, i), coord(1, j), z]);
                    }
                }
            }
        }
        DensitySpec::UniformBall { radius } => {
            let k = (radius / s).ceil() as i64 + 1;
            let kz = if d == 3 { k } else { 0 };
            for i in -k..k {
                for j in -k..k {
                    for l in -kz..kz.max(1) {
                        let x = [
                            (i as f64 + 0.5) * s,
                            (j as f64 + 0.5) * s,
                            if d == 3 { (l as f64 + 0.5) * s } else { 0.0 },
                        ];
                        if norm(&x) <= *radius {
                            out.push(x);
                        }
                    }
                }
            }
        }
        DensitySpec::PiecewiseConstant { .. } => {}
    }
    out
}

/// Deterministic cloud on a cell-centred cubic lattice inside a ball or box
/// support: the coarsest spacing hosting at least `N` points is used and the
/// points closest to the centre are kept.
pub fn lattice_points(sc: &Scenario, n: usize) -> Result<PointCloud> {
    if matches!(sc.density, DensitySpec::PiecewiseConstant { .. }) {
        return Err(Error::Unsupported("lattice clouds need a ball or box support".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("cloud size must be positive".into()));
    }
    let d = sc.d;
    let count = |s: f64| lattice_candidates(&sc.density, d, s).len();
    let r = sc.density.support_radius(d);
    let mut hi = 4.0 * r;
    let mut lo = hi;
    while count(lo) < n {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-9 * r {
            return Err(Error::Infeasible(format!("no lattice hosts {n} points")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if count(mid) >= n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut pts = lattice_candidates(&sc.density, d, lo);
    pts.sort_by(|a, b| {
        let ra = norm(a);
        let rb = norm(b);
        ra.total_cmp(&rb)
            .then(a[0].total_cmp(&b[0]))
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    pts.truncate(n);
    let cloud = PointCloud::with_scenario_strengths(sc, pts, 0);
    if n > 1 && cloud.min_pair_distance < required_distance(sc, n) * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!(
            "lattice spacing {} below the required {}",
            cloud.min_pair_distance,
            required_distance(sc, n)
        )));
    }
    Ok(cloud)
}

/// Test functions for weak convergence of the empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFamily {
    /// All monomials `x^a` with `|a| <= max_degree`.
    Monomials(u32),
    /// `exp(-|x - c|^2 / (2 w^2))`.
    Gaussians { centers: Vec<Point>, widths: Vec<f64> },
}

fn exponents(d: usize, max_degree: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for deg in 0..=max_degree {
        for a in (0..=deg).rev() {
            for b in (0..=(deg - a)).rev() {
                let c = deg - a - b;
                if d == 2 && c != 0 {
                    continue;
                }
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// `|(1/N) sum_j f(x_j) - int f U|` for every function of the family.
pub fn weak_convergence_gap(cloud: &PointCloud, sc: &Scenario, family: &TestFamily) -> Result<Vec<(String, f64)>> {
    let d = sc.d;
    let n = cloud.len() as f64;
    let mut out = Vec::new();
    let mut run = |id: String, f: &dyn Fn(&Point) -> f64| -> Result<()> {
        let emp: f64 = cloud.positions.iter().map(f).sum::<f64>() / n;
        let cont = sc.density.integrate(d, f, 1e-10)?;
        out.push((id, (emp - cont).abs()));
        Ok(())
    };
    match family {
        TestFamily::Monomials(deg) => {
            for e in exponents(d, *deg) {
                let f = move |x: &Point| x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32);
                let id = if d == 2 {
                    format!("x^({},{})", e[0], e[1])
                } else {
                    format!("x^({},{},{})", e[0], e[1], e[2])
                };
                run(id, &f)?;
            }
        }
        TestFamily::Gaussians { centers, widths } => {
            for (k, (c, w)) in centers.iter().zip(widths).enumerate() {
                let c = *c;
                let w = *w;
                let f = move |x: &Point| (-dist(x, &c).powi(2) / (2.0 * w * w)).exp();
                run(format!("gauss{k}"), &f)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Background, StrengthSpec};

    fn ball(d: usize, ell: f64) -> Scenario {
        Scenario {
            d,
            background: Background::free(),
            density: DensitySpec::UniformBall { radius: 1.0 },
            strength: StrengthSpec::Constant { a0: 1.0 },
            ell,
            lambda0: 1.0,
            seed: 7,
        }
    }

    fn square(ell: f64) -> Scenario {
        Scenario {
            density: DensitySpec::UniformBox {
                halfwidths: vec![1.0, 1.0],
            },
            ..ball(2, ell)
        }
    }

    #[test]
    fn single_point() {
        let c = sample_points(&ball(3, 0.5), 1, 3).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.min_pair_distance, f64::INFINITY);
        assert_eq!(c.strengths[0], 1.0);
        assert!(norm(&c.positions[0]) <= 1.0);
    }

    #[test]
    fn ball_cloud_respects_distance() {
        let c = sample_points(&ball(3, 0.5), 512, 7).unwrap();
        assert!(c.min_pair_distance >= 0.0625);
        assert!(c.positions.iter().all(|x| norm(x) <= 1.0));
        assert!(c.strengths.iter().all(|&a| a == 512.0));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let sc = ball(3, 0.5);
        let a = sample_points(&sc, 100, 1).unwrap();
        let b = sample_points(&sc, 100, 1).unwrap();
        let c = sample_points(&sc, 100, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn budget_exhaustion() {
        let mut sc = ball(2, 0.5);
        sc.ell = 3.0;
        assert!(matches!(sample_points(&sc, 50, 1), Err(Error::Budget { .. })));
    }

    #[test]
    fn lattice_examples() {
        let c = lattice_points(&square(1.0), 4).unwrap();
        let mut pts: Vec<(f64, f64)> = c.positions.iter().map(|p| (p[0], p[1])).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]);
        let c = lattice_points(&square(2.0), 9).unwrap();
        assert!((c.min_pair_distance - 2.0 / 3.0).abs() < 1e-12);
        let c = lattice_points(&ball(3, 0.5), 32).unwrap();
        assert_eq!(c.len(), 32);
        assert!(c.positions.iter().all(|x| norm(x) <= 1.0));
        assert!(lattice_points(&square(2.5), 9).is_err());
    }

    #[test]
    fn weak_gap_examples() {
        let sc = ball(3, 0.5);
        let c = sample_points(&sc, 256, 3).unwrap();
        let gaps = weak_convergence_gap(&c, &sc, &TestFamily::Monomials(2)).unwrap();
        assert_eq!(gaps[0].0, "x^(0,0,0)");
        assert!(gaps[0].1 < 1e-12);
        let mean_x1: f64 = c.positions.iter().map(|x| x[0]).sum::<f64>() / 256.0;
        let g1 = gaps.iter().find(|g| g.0 == "x^(1,0,0)").unwrap().1;
        assert!((g1 - mean_x1.abs()).abs() < 1e-9);
        assert_eq!(gaps.len(), 10);
    }

    #[test]
    fn csv_round_trip() {
        let sc = ball(3, 0.5);
        let c = sample_points(&sc, 40, 9).unwrap();
        let t = c.to_table();
        assert_eq!(t.header, vec!["j", "x1", "x2", "x3", "alpha"]);
        let back = PointCloud::from_table(&Table::from_csv_str(&t.to_csv_string()).unwrap(), 9).unwrap();
        assert_eq!(back, c);
    }
}
