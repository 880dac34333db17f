//! Bound states of `H_N` from the zeros of `Xi_N(-E)`, the spectrum of the
//! discretized limit operator, and the `N -> infinity` convergence study.

use crate::grid::{laplacian_apply, DirichletSolver, Grid, GridField};
use crate::kernels::QuadratureSpec;
use crate::linalg::{self, Eigenpairs};
use crate::sampling::{sample_points, PointCloud};
use crate::scenario::{Background, Scenario};
use crate::table::{fmt_f64, Table};
use crate::xi::{assemble_xi, XiMatrix};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Energy-scan settings for [`point_spectrum`].
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub n_scan: usize,
    /// Bracket width in energy.
    pub tol: f64,
    pub q: QuadratureSpec,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_scan: 64,
            tol: 1e-9,
            q: QuadratureSpec::default(),
        }
    }
}

/// Point spectrum of `H_N` inside an energy window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// For each eigenvalue, an orthonormal basis of the null space of `Xi`
    /// at the root (one vector per unit of multiplicity).
    pub charges: Vec<Vec<Vec<f64>>>,
    pub bracket_width: f64,
    /// Scan cells where the sorted eigenvalue curves were not monotone.
    pub warnings: Vec<String>,
}

/// Flips `v` so that its first component of magnitude above `1e-8` is
/// positive.
pub fn normalize_sign(v: &mut [f64]) {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-8) {
        if *x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

struct Scan<'a> {
    cloud: &'a PointCloud,
    bg: &'a Background,
    s0: f64,
    q: QuadratureSpec,
    bottom: f64,
}

impl Scan<'_> {
    fn energy(&self, kappa: f64) -> f64 {
        self.bottom - kappa * kappa
    }

    fn xi(&self, e: f64) -> Result<XiMatrix> {
        assemble_xi(self.cloud, self.bg, -e, self.s0, &self.q)
    }

    fn sorted(&self, e: f64) -> Result<Vec<f64>> {
        Ok(self.xi(e)?.eigenvalues())
    }
}

/// Eigenvalues of `H_N` in `[e_min, e_max]` as the energies where a sorted
/// eigenvalue `mu_k(E)` of `Xi_N(s = -E)` vanishes.
///
/// Each `mu_k` is non-increasing in `E`, so the number of negative
/// eigenvalues of `Xi_N(-E)` counts the bound states below `E`. The scan is
/// log-spaced in `kappa = sqrt(bottom - E)`; every root is refined by
/// bisection in `E`.
pub fn point_spectrum(
    cloud: &PointCloud,
    bg: &Background,
    s0: f64,
    e_min: f64,
    e_max: f64,
    opts: &ScanOptions,
) -> Result<SpectrumReport> {
    let d = cloud.d;
    let bottom = bg.spectral_bottom(d);
    if !(e_max < bottom) {
        return Err(Error::Parameter(format!(
            "window top {e_max} is not below the spectral bottom {bottom}"
        )));
    }
    if !(e_min < e_max) || opts.n_scan < 2 || !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!(
            "bad scan window [{e_min}, {e_max}] with {} nodes",
            opts.n_scan
        )));
    }
    let scan = Scan {
        cloud,
        bg,
        s0,
        q: opts.q,
        bottom,
    };
    let n = cloud.len();
    if n == 0 {
        return Ok(SpectrumReport {
            eigenvalues: vec![],
            multiplicities: vec![],
            charges: vec![],
            bracket_width: opts.tol,
            warnings: vec![],
        });
    }
    let k_lo = (bottom - e_max).sqrt();
    let k_hi = (bottom - e_min).sqrt();
    let ns = opts.n_scan;
    // energies ascending: large kappa first
    let energies: Vec<f64> = (0..ns)
        .map(|i| {
            let t = i as f64 / (ns - 1) as f64;
            let kappa = (k_hi.ln() + t * (k_lo.ln() - k_hi.ln())).exp();
            if i == 0 {
                e_min
            } else if i == ns - 1 {
                e_max
            } else {
                scan.energy(kappa)
            }
        })
        .collect();
    let curves: Vec<Vec<f64>> = energies
        .par_iter()
        .map(|&e| scan.sorted(e))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    for c in 0..ns - 1 {
        let bad = (0..n).any(|k| curves[c + 1][k] > curves[c][k] + 1e-12 * (1.0 + curves[c][k].abs()));
        if bad {
            // one-level subdivision of the suspicious cell
            let mid = 0.5 * (energies[c] + energies[c + 1]);
            let cm = scan.sorted(mid)?;
            let still = (0..n).any(|k| {
                cm[k] > curves[c][k] + 1e-12 * (1.0 + cm[k].abs()) || curves[c + 1][k] > cm[k] + 1e-12 * (1.0 + cm[k].abs())
            });
            if still {
                warnings.push(format!(
                    "eigenvalue curves not monotone on [{}, {}]",
                    energies[c],
                    energies[c + 1]
                ));
            }
        }
    }

    // roots: branch k changes sign from + to - between consecutive nodes
    let mut brackets: Vec<(usize, f64, f64)> = Vec::new();
    for k in 0..n {
        if curves[0][k] <= 0.0 {
            // already negative at e_min: root lies below the window
            continue;
        }
        for c in 0..ns - 1 {
            if curves[c][k] > 0.0 && curves[c + 1][k] <= 0.0 {
                brackets.push((k, energies[c], energies[c + 1]));
                break;
            }
        }
    }
    let roots: Vec<(usize, f64)> = brackets
        .par_iter()
        .map(|&(k, mut a, mut b)| {
            while b - a > opts.tol {
                let m = 0.5 * (a + b);
                let ev = scan.sorted(m)?;
                if ev[k] > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok((k, 0.5 * (a + b)))
        })
        .collect::<Result<Vec<_>>>()?;

    // merge roots closer than tol into clusters
    let mut roots = roots;
    roots.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut clusters: Vec<Vec<(usize, f64)>> = Vec::new();
    for r in roots {
        match clusters.last_mut() {
            Some(c) if r.1 - c.last().unwrap().1 <= opts.tol => c.push(r),
            _ => clusters.push(vec![r]),
        }
    }
    let mut eigenvalues = Vec::new();
    let mut multiplicities = Vec::new();
    let mut charges = Vec::new();
    for c in clusters {
        let e = c.iter().map(|r| r.1).sum::<f64>() / c.len() as f64;
        let xi = scan.xi(e)?;
        let (vals, vecs) = xi.eigen();
        // the null directions are the eigenvalues closest to zero
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = idx[..c.len()].to_vec();
        chosen.sort_unstable();
        let basis = chosen
            .iter()
            .map(|&j| {
                let mut v: Vec<f64> = vecs.column(j).iter().copied().collect();
                normalize_sign(&mut v);
                v
            })
            .collect();
        eigenvalues.push(e);
        multiplicities.push(c.len());
        charges.push(basis);
    }
    Ok(SpectrumReport {
        eigenvalues,
        multiplicities,
        charges,
        bracket_width: opts.tol,
        warnings,
    })
}

/// `min |eig Xi_N(-E)| / ||Xi||_F`, the root certificate of an eigenvalue.
pub fn root_residual(cloud: &PointCloud, bg: &Background, s0: f64, e: f64, q: &QuadratureSpec) -> Result<f64> {
    let xi = assemble_xi(cloud, bg, -e, s0, q)?;
    let m = xi.eigenvalues().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok(m / xi.frobenius())
}

/// Lowest eigenvalue of `H_N` in `[e_min, e_max]`, by bisection on the
/// positive definiteness of `Xi_N(-E)`; `None` if `H_N` has no eigenvalue in
/// the window.
pub fn ground_state(
    cloud: &PointCloud,
    bg: &Background,
    s0: f64,
    e_min: f64,
    e_max: f64,
    tol: f64,
    q: &QuadratureSpec,
) -> Result<Option<f64>> {
    let bottom = bg.spectral_bottom(cloud.d);
    if !(e_min < e_max && e_max < bottom) {
        return Err(Error::Parameter(format!(
            "ground-state window [{e_min}, {e_max}] must lie below {bottom}"
        )));
    }
    let pd = |e: f64| -> Result<bool> { Ok(assemble_xi(cloud, bg, -e, s0, q)?.is_positive_definite()) };
    if pd(e_max)? {
        return Ok(None);
    }
    if !pd(e_min)? {
        return Err(Error::Parameter(format!(
            "ground state lies below the window bottom {e_min}"
        )));
    }
    let (mut a, mut b) = (e_min, e_max);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if pd(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Finite-difference `-Delta_h + V` on a Dirichlet box.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub grid: Grid,
    pub potential: Vec<f64>,
}

impl GridOperator {
    /// Operator with explicit node potential.
    pub fn from_potential(grid: Grid, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "{} potential values for {} nodes",
                potential.len(),
                grid.len()
            )));
        }
        if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("potential is not finite at node {i}")));
        }
        Ok(Self { grid, potential })
    }

    pub fn d(&self) -> usize {
        self.grid.d
    }

    /// `out = (-Delta_h + V) v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        laplacian_apply(&self.grid, v, out);
        out.par_chunks_mut(4096)
            .zip(v.par_chunks(4096))
            .zip(self.potential.par_chunks(4096))
            .for_each(|((o, v), p)| {
                for ((o, v), p) in o.iter_mut().zip(v).zip(p) {
                    *o += p * v;
                }
            });
    }

    /// Returns the operator with `c` added to the potential.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            potential: self.potential.iter().map(|v| v + c).collect(),
        }
    }

    fn min_potential(&self) -> f64 {
        self.potential.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Discretizes `H_0 - U/a` for a scenario on `[-L, L]^d` with spacing `h`.
///
/// The support of `U` must keep 4 cells to the wall and the box must be at
/// least twice the support radius.
pub fn grid_operator(sc: &Scenario, l: f64, h: f64) -> Result<GridOperator> {
    let grid = Grid::new(sc.d, l, h)?;
    let (lo, hi) = sc.density.bounding_box(sc.d);
    let inner = l - 4.0 * h;
    for a in 0..sc.d {
        if lo[a] < -inner || hi[a] > inner {
            return Err(Error::Config(format!(
                "support of U reaches {:.4} on axis {a}; margin rule needs it inside +-{inner:.4}",
                lo[a].abs().max(hi[a].abs())
            )));
        }
    }
    let radius = sc.density.support_radius(sc.d);
    if l < 2.0 * radius {
        return Err(Error::Config(format!(
            "box half-width {l} is below twice the support radius {radius}"
        )));
    }
    let potential = (0..grid.len())
        .into_par_iter()
        .map(|i| sc.limit_potential(&grid.point(i)))
        .collect();
    GridOperator::from_potential(grid, potential)
}

fn start_block(solver: &DirichletSolver, m: usize) -> Vec<Vec<f64>> {
    let g = solver.grid();
    let n = g.n;
    let d = g.d;
    // lowest box modes in a fixed order
    let cap = (m + 2).min(n);
    let mut modes: Vec<Vec<usize>> = Vec::new();
    let mut idx = vec![1usize; d];
    loop {
        modes.push(idx.clone());
        let mut a = d;
        loop {
            if a == 0 {
                break;
            }
            a -= 1;
            if idx[a] < cap {
                idx[a] += 1;
                for b in a + 1..d {
                    idx[b] = 1;
                }
                break;
            }
            if a == 0 {
                a = usize::MAX;
                break;
            }
        }
        if a == usize::MAX {
            break;
        }
    }
    modes.sort_by(|a, b| solver.mode_eigenvalue(a).total_cmp(&solver.mode_eigenvalue(b)).then(a.cmp(b)));
    let pi = std::f64::consts::PI;
    modes
        .iter()
        .take(m)
        .map(|mode| {
            (0..g.len())
                .into_par_iter()
                .map(|i| {
                    let mi = g.multi_index(i);
                    (0..d)
                        .map(|a| (pi * (mi[a] + 1) as f64 * mode[a] as f64 / (n + 1) as f64).sin())
                        .product::<f64>()
                })
                .collect()
        })
        .collect()
}

/// The `k` lowest eigenpairs of a grid operator by block LOBPCG with a
/// fast-Poisson preconditioner; residuals satisfy `||Hv - Ev|| <= tol ||v||`.
pub fn grid_eigenpairs(op: &GridOperator, k: usize, tol: f64) -> Result<(Vec<f64>, Vec<GridField>)> {
    if k == 0 || k > 10 {
        return Err(Error::Parameter(format!("grid_eigs supports 1..=10 eigenvalues, got {k}")));
    }
    if k > op.grid.len() {
        return Err(Error::Parameter("more eigenvalues requested than grid nodes".into()));
    }
    let solver = DirichletSolver::new(op.grid);
    let m = (k + 2).min(op.grid.len());
    let x0 = start_block(&solver, m);
    let c = (1.0 - op.min_potential()).max(1.0);
    let apply = |v: &[f64], out: &mut [f64]| op.apply(v, out);
    let precond = |r: &[f64], z: &mut [f64]| solver.solve(c, r, z);
    let Eigenpairs { values, vectors, .. } = linalg::lobpcg(apply, precond, x0, k, tol, 2000)?;
    let fields = vectors
        .into_iter()
        .map(|mut v| {
            let norm = (op.grid.cell_volume() * linalg::dot(&v, &v)).sqrt();
            linalg::scale(1.0 / norm, &mut v);
            normalize_sign(&mut v);
            GridField { grid: op.grid, values: v }
        })
        .collect();
    Ok((values, fields))
}

/// The `k` lowest eigenvalues of a grid operator.
pub fn grid_eigs(op: &GridOperator, k: usize, tol: f64) -> Result<Vec<f64>> {
    Ok(grid_eigenpairs(op, k, tol)?.0)
}

/// One `(N, seed)` cell of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub seed: u64,
    /// `None` when `H_N` has no eigenvalue in the window.
    pub e1_hn: Option<f64>,
    pub e1_hinf: f64,
}

impl ConvergenceRow {
    pub fn gap(&self) -> Option<f64> {
        self.e1_hn.map(|e| (e - self.e1_hinf).abs())
    }
}

/// Per-`N` statistics over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub e1_hinf: f64,
    /// `|mean E_1(H_N) - E_1(H_inf)|`.
    pub gap: f64,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub e1_hinf: f64,
}

impl ConvergenceTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["N", "seed", "E1_HN", "E1_Hinf", "gap"]);
        for r in &self.rows {
            t.push(vec![
                r.n.to_string(),
                r.seed.to_string(),
                fmt_f64(r.e1_hn.unwrap_or(f64::NAN)),
                fmt_f64(r.e1_hinf),
                fmt_f64(r.gap().unwrap_or(f64::NAN)),
            ]);
        }
        t
    }

    pub fn summary(&self) -> Vec<ConvergenceSummary> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.dedup();
        ns.iter()
            .map(|&n| {
                let rows: Vec<&ConvergenceRow> = self.rows.iter().filter(|r| r.n == n).collect();
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.e1_hn).collect();
                let k = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / k;
                let var = if vals.len() > 1 {
                    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
                } else {
                    0.0
                };
                ConvergenceSummary {
                    n,
                    mean,
                    min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
                    max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    std: var.sqrt(),
                    e1_hinf: self.e1_hinf,
                    gap: (mean - self.e1_hinf).abs(),
                    flagged: rows.len() - vals.len(),
                }
            })
            .collect()
    }
}

/// Settings of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub l: f64,
    pub h: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// Energy tolerance of the `H_N` bisection.
    pub tol: f64,
    /// Residual tolerance of the grid eigensolver.
    pub grid_tol: f64,
    pub q: QuadratureSpec,
}

/// Ground states of `H_N` for every `N` and seeds `sc.seed + k`,
/// `k < n_seeds`, against the grid ground state of `H_0 - U/a`.
pub fn convergence_study(
    sc: &Scenario,
    n_list: &[usize],
    n_seeds: usize,
    opts: &StudyOptions,
) -> Result<ConvergenceTable> {
    let op = grid_operator(sc, opts.l, opts.h)?;
    let e1_hinf = grid_eigs(&op, 1, opts.grid_tol)?[0];
    let mut n_sorted = n_list.to_vec();
    n_sorted.sort_unstable();
    let jobs: Vec<(usize, u64)> = n_sorted
        .iter()
        .flat_map(|&n| (0..n_seeds as u64).map(move |k| (n, k)))
        .collect();
    let s0 = sc.lambda0 * sc.lambda0;
    let rows = jobs
        .par_iter()
        .map(|&(n, k)| {
            let seed = sc.seed + k;
            let cloud = sample_points(sc, n, seed)?;
            let e = ground_state(&cloud, &sc.background, s0, opts.e_min, opts.e_max, opts.tol, &opts.q)?;
            Ok(ConvergenceRow {
                n,
                seed,
                e1_hn: e,
                e1_hinf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { rows, e1_hinf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn single(alpha: f64) -> PointCloud {
        PointCloud::from_parts(3, vec![[0.0; 3]], vec![alpha], 0)
    }

    #[test]
    fn single_center_root() {
        let rep = point_spectrum(&single(-1.0 / (4.0 * PI)), &Background::free(), 1.0, -100.0, -1e-6, &ScanOptions::default()).unwrap();
        assert_eq!(rep.eigenvalues.len(), 1);
        assert!((rep.eigenvalues[0] + 4.0).abs() < 1e-8);
        assert_eq!(rep.charges[0][0], vec![1.0]);
    }

    #[test]
    fn repulsive_center_has_no_bound_state() {
        let rep = point_spectrum(&single(1.0), &Background::free(), 1.0, -100.0, -1e-6, &ScanOptions::default()).unwrap();
        assert!(rep.eigenvalues.is_empty());
        let gs = ground_state(&single(1.0), &Background::free(), 1.0, -100.0, -1e-6, 1e-9, &QuadratureSpec::default()).unwrap();
        assert!(gs.is_none());
    }

    #[test]
    fn symmetric_pair_has_parity_charges() {
        let cloud = PointCloud::from_parts(3, vec![[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]], vec![-0.1, -0.1], 0);
        let rep = point_spectrum(&cloud, &Background::free(), 1.0, -200.0, -1e-6, &ScanOptions::default()).unwrap();
        assert_eq!(rep.eigenvalues.len(), 2);
        let r = 0.5f64.sqrt();
        let even = &rep.charges[0][0];
        let odd = &rep.charges[1][0];
        assert!((even[0] - r).abs() < 1e-6 && (even[1] - r).abs() < 1e-6);
        assert!((odd[0] - r).abs() < 1e-6 && (odd[1] + r).abs() < 1e-6);
        let gs = ground_state(&cloud, &Background::free(), 1.0, -200.0, -1e-6, 1e-10, &QuadratureSpec::default())
            .unwrap()
            .unwrap();
        assert!((gs - rep.eigenvalues[0]).abs() < 1e-8);
        for e in &rep.eigenvalues {
            let res = root_residual(&cloud, &Background::free(), 1.0, *e, &QuadratureSpec::default()).unwrap();
            assert!(res <= 10.0 * 1e-9);
        }
    }

    #[test]
    fn box_spectrum_ratio() {
        let g = Grid::new(2, 1.0, 0.05).unwrap();
        let op = GridOperator::from_potential(g, vec![0.0; g.len()]).unwrap();
        let ev = grid_eigs(&op, 3, 1e-8).unwrap();
        let exact = 2.0 * (PI / 2.0).powi(2);
        assert!((ev[0] - exact).abs() / exact < 2e-3);
        assert!((ev[1] / ev[0] - 2.5).abs() < 0.05);
        assert!((ev[1] - ev[2]).abs() < 1e-6);
        let shifted = grid_eigs(&op.shifted(0.75), 3, 1e-8).unwrap();
        for k in 0..3 {
            assert!((shifted[k] - ev[k] - 0.75).abs() < 1e-9);
        }
    }
}
