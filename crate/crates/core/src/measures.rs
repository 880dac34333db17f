//! Empirical-measure functionals: Riesz energies and singular pair sums of
//! a cloud, and the continuum double integrals they converge to.

use crate::kernels::{zeta0_unchecked, GreenEval, QuadratureSpec};
use crate::quad::GaussLegendre;
use crate::sampling::{sample_points, PointCloud};
use crate::scenario::{Background, Region, Scenario};
use crate::table::{fmt_f64, Table};
use crate::{dist, Error, Point, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

/// `(1/N^2) sum_{i != j} |x_i - x_j|^{-s}`.
pub fn riesz_energy(cloud: &PointCloud, s_exp: f64) -> Result<f64> {
    if !(s_exp > 0.0 && s_exp < cloud.d as f64) {
        return Err(Error::Domain(format!(
            "Riesz exponent {s_exp} outside (0, {})",
            cloud.d
        )));
    }
    if cloud.len() < 2 {
        return Err(Error::Parameter("Riesz energy needs at least two points".into()));
    }
    let w = vec![1.0; cloud.len()];
    Ok(pair_sum(cloud, &w, &PairKernel::Riesz(s_exp)))
}

/// Kernels of the pair sums.
#[derive(Debug, Clone, Copy)]
pub enum PairKernel {
    Riesz(f64),
    /// `zeta0(|x - y|) xi(x, y)` with a continuous `xi`.
    Zeta0TimesXi(fn(&Point, &Point) -> f64),
    /// The full background Green function at `s`.
    GreenFull { bg: Background, s: f64, q: QuadratureSpec },
}

impl PairKernel {
    /// `zeta0` alone.
    pub fn zeta0() -> Self {
        fn one(_: &Point, _: &Point) -> f64 {
            1.0
        }
        PairKernel::Zeta0TimesXi(one)
    }

    fn evaluator(&self, d: usize) -> Result<KernelEval> {
        Ok(match *self {
            PairKernel::Riesz(s) => {
                if !(s > 0.0 && s < d as f64) {
                    return Err(Error::Domain(format!("Riesz exponent {s} outside (0, {d})")));
                }
                KernelEval::Riesz(s)
            }
            PairKernel::Zeta0TimesXi(f) => KernelEval::Zeta(d, f),
            PairKernel::GreenFull { bg, s, q } => KernelEval::Green(GreenEval::new(bg, d, s, q)?),
        })
    }
}

enum KernelEval {
    Riesz(f64),
    Zeta(usize, fn(&Point, &Point) -> f64),
    Green(GreenEval),
}

impl KernelEval {
    #[inline]
    fn eval(&self, x: &Point, y: &Point, r: f64) -> f64 {
        match self {
            KernelEval::Riesz(s) => r.powf(-s),
            KernelEval::Zeta(d, f) => zeta0_unchecked(*d, r) * f(x, y),
            KernelEval::Green(g) => g.green(x, y),
        }
    }
}

/// `(1/N^2) sum_{i != j} k(x_i, x_j) p_i p_j`, rows summed in index order.
fn pair_sum_with(cloud: &PointCloud, p: &[f64], k: &KernelEval) -> f64 {
    let x = &cloud.positions;
    let n = x.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    acc += k.eval(&x[i], &x[j], dist(&x[i], &x[j])) * p[j];
                }
            }
            acc * p[i]
        })
        .collect();
    rows.iter().sum::<f64>() / (n as f64 * n as f64)
}

fn pair_sum(cloud: &PointCloud, p: &[f64], kernel: &PairKernel) -> f64 {
    let k = kernel.evaluator(cloud.d).expect("kernel checked by caller");
    pair_sum_with(cloud, p, &k)
}

/// Outer quadrature nodes `(x, weight)` of a region at order `m`.
fn region_nodes(region: &Region, d: usize, m: usize) -> Vec<(Point, f64)> {
    let gl = GaussLegendre::get(m);
    let mut out = Vec::new();
    match region {
        Region::Ball { radius } => {
            let r0 = *radius;
            for (ur, wr) in gl.nodes.iter().zip(&gl.weights) {
                let r = 0.5 * r0 * (ur + 1.0);
                let jr = 0.5 * r0 * wr * r.powi(d as i32 - 1);
                for (uf, wf) in gl.nodes.iter().zip(&gl.weights) {
                    let phi = PI * (uf + 1.0);
                    let jf = PI * wf;
                    if d == 2 {
                        out.push(([r * phi.cos(), r * phi.sin(), 0.0], jr * jf));
                    } else {
                        for (c, wc) in gl.nodes.iter().zip(&gl.weights) {
                            let sn = (1.0 - c * c).sqrt();
                            out.push(([r * sn * phi.cos(), r * sn * phi.sin(), r * c], jr * jf * wc));
                        }
                    }
                }
            }
        }
        Region::Box { lo, hi } => {
            let total = m.pow(d as u32);
            for idx in 0..total {
                let mut rest = idx;
                let mut x = [0.0; 3];
                let mut w = 1.0;
                for a in 0..d {
                    let k = rest % m;
                    rest /= m;
                    let half = 0.5 * (hi[a] - lo[a]);
                    x[a] = lo[a] + half * (gl.nodes[k] + 1.0);
                    w *= half * gl.weights[k];
                }
                out.push((x, w));
            }
        }
    }
    out
}

/// Unit directions `(w, weight)` in a frame whose pole points along `x`.
fn directions(x: &Point, d: usize, m: usize) -> Vec<(Point, f64)> {
    let gl = GaussLegendre::get(m);
    let nx = crate::norm(x);
    let mut out = Vec::with_capacity(m * m);
    if d == 2 {
        let base = if nx > 0.0 { x[1].atan2(x[0]) } else { 0.0 };
        for (u, w) in gl.nodes.iter().zip(&gl.weights) {
            let phi = base + PI * (u + 1.0);
            out.push(([phi.cos(), phi.sin(), 0.0], PI * w));
        }
        return out;
    }
    let e3 = if nx > 0.0 { [x[0] / nx, x[1] / nx, x[2] / nx] } else { [0.0, 0.0, 1.0] };
    // any vector not parallel to e3
    let t = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = t[0] * e3[0] + t[1] * e3[1] + t[2] * e3[2];
    let mut e1 = [t[0] - dot * e3[0], t[1] - dot * e3[1], t[2] - dot * e3[2]];
    let n1 = crate::norm(&e1);
    e1.iter_mut().for_each(|v| *v /= n1);
    let e2 = [
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    ];
    for (c, wc) in gl.nodes.iter().zip(&gl.weights) {
        let sn = (1.0 - c * c).sqrt();
        for (u, wf) in gl.nodes.iter().zip(&gl.weights) {
            let phi = PI * (u + 1.0);
            let (a, b) = (sn * phi.cos(), sn * phi.sin());
            let w = [
                a * e1[0] + b * e2[0] + c * e3[0],
                a * e1[1] + b * e2[1] + c * e3[1],
                a * e1[2] + b * e2[2] + c * e3[2],
            ];
            out.push((w, wc * PI * wf));
        }
    }
    out
}

fn product_estimate<P: Fn(&Point) -> f64 + Sync>(
    sc: &Scenario,
    k: &KernelEval,
    p: &P,
    m: usize,
) -> f64 {
    let d = sc.d;
    let regions = sc.density.regions(d);
    let gl = GaussLegendre::get(m);
    let mut total = 0.0;
    for (outer, uo) in &regions {
        let nodes = region_nodes(outer, d, m);
        let vals: Vec<f64> = nodes
            .par_iter()
            .map(|(x, wx)| {
                let px = p(x);
                if px == 0.0 {
                    return 0.0;
                }
                let mut inner = 0.0;
                for (w, ww) in directions(x, d, m) {
                    for (reg, ui) in &regions {
                        let Some((t0, t1)) = reg.ray_interval(d, x, &w) else {
                            continue;
                        };
                        let mut seg = 0.0;
                        for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
                            // r = t0 + (t1 - t0) v^2 with v in [0, 1]
                            let v = 0.5 * (u + 1.0);
                            let r = t0 + (t1 - t0) * v * v;
                            let jac = 0.5 * wu * 2.0 * (t1 - t0) * v;
                            if r <= 0.0 {
                                continue;
                            }
                            let y = [x[0] + r * w[0], x[1] + r * w[1], x[2] + r * w[2]];
                            seg += jac * r.powi(d as i32 - 1) * k.eval(x, &y, r) * p(&y);
                        }
                        inner += ww * ui * seg;
                    }
                }
                wx * uo * px * inner
            })
            .collect();
        total += vals.iter().sum::<f64>();
    }
    total
}

/// `int int k(x, y) p(x) p(y) U(x) U(y) dx dy` by product Gauss rules in
/// spherical coordinates around each outer node, with the radial variable
/// squared to tame the diagonal singularity. Orders are raised until two
/// successive estimates agree within `tol`.
pub fn continuum_pair_integral<P: Fn(&Point) -> f64 + Sync>(
    sc: &Scenario,
    kernel: &PairKernel,
    p: P,
    tol: f64,
) -> Result<f64> {
    let k = kernel.evaluator(sc.d)?;
    let orders: &[usize] = if sc.d == 2 { &[8, 16, 24, 32, 48, 64, 96] } else { &[8, 12, 16, 24, 32] };
    let mut prev = product_estimate(sc, &k, &p, orders[0]);
    let mut err = f64::INFINITY;
    for &m in &orders[1..] {
        let cur = product_estimate(sc, &k, &p, m);
        err = (cur - prev).abs();
        if err <= tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Tolerance {
        estimate: prev,
        error: err,
        tol,
    })
}

/// Discrete and continuum sides of one pair-sum comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGap {
    pub discrete: f64,
    pub continuum: f64,
    pub gap: f64,
}

/// `|(1/N^2) sum_{i != j} k(x_i, x_j) p_i p_j - continuum|` with
/// `p_j = p(x_j)`. Charge sets with `(1/N) sum p_j^2 > charge_bound` are
/// rejected.
pub fn pair_sum_gap<P: Fn(&Point) -> f64 + Sync>(
    cloud: &PointCloud,
    p: P,
    kernel: &PairKernel,
    sc: &Scenario,
    tol: f64,
    charge_bound: f64,
) -> Result<PairGap> {
    let charges: Vec<f64> = cloud.positions.iter().map(&p).collect();
    let continuum = continuum_pair_integral(sc, kernel, &p, tol)?;
    pair_sum_gap_with(cloud, &charges, kernel, continuum, charge_bound)
}

/// As [`pair_sum_gap`] with explicit charges and a precomputed continuum
/// value.
pub fn pair_sum_gap_with(
    cloud: &PointCloud,
    charges: &[f64],
    kernel: &PairKernel,
    continuum: f64,
    charge_bound: f64,
) -> Result<PairGap> {
    let n = cloud.len();
    if charges.len() != n {
        return Err(Error::Parameter(format!("{} charges for {n} points", charges.len())));
    }
    let norm = charges.iter().map(|p| p * p).sum::<f64>() / n.max(1) as f64;
    if norm > charge_bound {
        return Err(Error::Parameter(format!(
            "charge norm (1/N) sum p^2 = {norm} exceeds the bound {charge_bound}"
        )));
    }
    let k = kernel.evaluator(cloud.d)?;
    let discrete = pair_sum_with(cloud, charges, &k);
    Ok(PairGap {
        discrete,
        continuum,
        gap: (discrete - continuum).abs(),
    })
}

/// One row of a measures study.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub n: usize,
    pub seed: u64,
    pub quantity: String,
    pub value: f64,
    pub oracle: f64,
}

impl MeasureRow {
    pub fn gap(&self) -> f64 {
        (self.value - self.oracle).abs()
    }
}

pub fn measure_table(rows: &[MeasureRow]) -> Table {
    let mut t = Table::new(&["N", "seed", "quantity", "value", "oracle", "gap"]);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            r.seed.to_string(),
            r.quantity.clone(),
            fmt_f64(r.value),
            fmt_f64(r.oracle),
            fmt_f64(r.gap()),
        ]);
    }
    t
}

/// Riesz energies for each exponent and the `zeta0` pair sum with unit
/// charges, for every `N` and seeds `sc.seed + k`.
pub fn measures_study(
    sc: &Scenario,
    n_list: &[usize],
    n_seeds: usize,
    riesz_exponents: &[f64],
    tol: f64,
) -> Result<Vec<MeasureRow>> {
    let mut kernels: Vec<(String, PairKernel)> = riesz_exponents
        .iter()
        .map(|s| (format!("riesz_s={s}"), PairKernel::Riesz(*s)))
        .collect();
    kernels.push(("pair_zeta0".to_string(), PairKernel::zeta0()));
    let oracles = kernels
        .iter()
        .map(|(_, k)| continuum_pair_integral(sc, k, |_: &Point| 1.0, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    let mut rows = Vec::new();
    for &n in &ns {
        for k in 0..n_seeds as u64 {
            let seed = sc.seed + k;
            let cloud = sample_points(sc, n, seed)?;
            let ones = vec![1.0; n];
            for ((name, kernel), oracle) in kernels.iter().zip(&oracles) {
                let g = pair_sum_gap_with(&cloud, &ones, kernel, *oracle, 1.0)?;
                rows.push(MeasureRow {
                    n,
                    seed,
                    quantity: name.clone(),
                    value: g.discrete,
                    oracle: *oracle,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{DensitySpec, StrengthSpec};

    fn ball(d: usize) -> Scenario {
        Scenario {
            d,
            background: Background::free(),
            density: DensitySpec::UniformBall { radius: 1.0 },
            strength: StrengthSpec::Constant { a0: 1.0 },
            ell: 1.0,
            lambda0: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn two_points() {
        let c = PointCloud::from_parts(3, vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![1.0, 1.0], 0);
        for s in [0.5, 1.0, 2.5] {
            assert!((riesz_energy(&c, s).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!(riesz_energy(&c, 3.0).is_err());
    }

    #[test]
    fn ball_riesz_continuum() {
        let v = continuum_pair_integral(&ball(3), &PairKernel::Riesz(1.0), |_: &Point| 1.0, 1e-4).unwrap();
        assert!((v - 1.2).abs() < 1e-3, "{v}");
        let z = continuum_pair_integral(&ball(3), &PairKernel::Riesz(1.0), |_: &Point| 0.0, 1e-4).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn green_pair_sum_matches_xi() {
        let sc = ball(3);
        let cloud = sample_points(&sc, 40, 3).unwrap();
        let lam: f64 = 1.7;
        let q = QuadratureSpec::default();
        let xi = crate::xi::assemble_xi(&cloud, &sc.background, lam * lam, 1.0, &q).unwrap();
        let p: Vec<f64> = cloud.positions.iter().map(|x| 1.0 + x[0]).collect();
        let k = PairKernel::GreenFull { bg: sc.background, s: lam * lam, q };
        let g = pair_sum_gap_with(&cloud, &p, &k, 0.0, 10.0).unwrap();
        let n = cloud.len();
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off -= xi.entries[(i, j)] * p[i] * p[j];
                }
            }
        }
        off /= (n * n) as f64;
        assert!((g.discrete - off).abs() < 1e-12 * off.abs());
    }
}
