//! Free, Krein and limit resolvents on grids, and the resolvent-convergence
//! gap `||R_N f - R_inf f||`.
//!
//! Krein outputs are kept in a structured form: a grid part plus explicit
//! multiples of the Green columns `G^mu(., x_i)`. Resolvents and inner
//! products of the columns are evaluated through the resolvent identity
//! `R^lambda G^mu_i = (G^mu_i - G^lambda_i) / (lambda^2 - mu^2)`, so only the
//! smooth grid part sees the grid.

use crate::grid::{lattice_self_average, DirichletSolver, FreeConvolution, Grid, GridField};
use crate::kernels::{diag_reg_unchecked, green_l2_inner, GreenEval, QuadratureSpec};
use crate::linalg;
use crate::sampling::{sample_points, PointCloud};
use crate::scenario::{Background, BackgroundKind, Scenario};
use crate::spectra::{grid_operator, GridOperator};
use crate::table::{fmt_f64, Table};
use crate::{dist, Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// Condition number above which `Xi` is treated as singular.
pub const MAX_XI_CONDITION: f64 = 1e12;

/// `(H_0 + lambda^2)^{-1}` on grid functions: FFT convolution with the free
/// kernel, or a preconditioned CG solve of the finite-difference trap.
#[derive(Debug, Clone)]
pub enum GridResolvent {
    Free(FreeConvolution),
    Trapped {
        op: GridOperator,
        solver: DirichletSolver,
        shift: f64,
        tol: f64,
    },
}

impl GridResolvent {
    pub fn new(bg: &Background, grid: Grid, lambda: f64, tol: f64) -> Result<Self> {
        match bg.kind {
            BackgroundKind::Free => Ok(Self::Free(FreeConvolution::new(grid, lambda)?)),
            BackgroundKind::Harmonic => {
                let pot = (0..grid.len()).into_par_iter().map(|i| bg.potential(&grid.point(i))).collect();
                Ok(Self::Trapped {
                    op: GridOperator::from_potential(grid, pot)?,
                    solver: DirichletSolver::new(grid),
                    shift: lambda * lambda,
                    tol,
                })
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Self::Free(c) => c.grid(),
            Self::Trapped { op, .. } => &op.grid,
        }
    }

    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        if f.grid != *self.grid() {
            return Err(Error::Geometry(format!("{:?} vs {:?}", f.grid, self.grid())));
        }
        let values = match self {
            Self::Free(c) => c.apply(&f.values),
            Self::Trapped { op, solver, shift, tol } => {
                let apply = |v: &[f64], out: &mut [f64]| {
                    op.apply(v, out);
                    linalg::axpy(*shift, v, out);
                };
                let pre = |r: &[f64], z: &mut [f64]| solver.solve(*shift, r, z);
                linalg::pcg(apply, pre, &f.values, *tol, 5000)?.x
            }
        };
        Ok(GridField { grid: f.grid, values })
    }
}

/// Free resolvent `(-Delta + lambda^2)^{-1} f` by the node-sum quadrature.
pub fn free_resolvent_apply(d: usize, lambda: f64, f: &GridField) -> Result<GridField> {
    if d != f.grid.d {
        return Err(Error::Geometry(format!("dimension {d} for a {}-d grid", f.grid.d)));
    }
    let conv = FreeConvolution::new(f.grid, lambda)?;
    Ok(GridField {
        grid: f.grid,
        values: conv.apply(&f.values),
    })
}

/// Coefficients of the columns `G^lambda(., x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPart {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
}

/// `psi = regular + sum_k sum_i coeffs_k[i] G^{lambda_k}(., x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinField {
    pub regular: GridField,
    pub singular: Vec<SingularPart>,
}

impl KreinField {
    pub fn from_grid(f: GridField) -> Self {
        Self {
            regular: f,
            singular: Vec::new(),
        }
    }

    fn push_part(parts: &mut Vec<SingularPart>, lambda: f64, c: f64, coeffs: &[f64]) {
        if let Some(p) = parts.iter_mut().find(|p| p.lambda == lambda) {
            for (a, b) in p.coeffs.iter_mut().zip(coeffs) {
                *a += c * b;
            }
        } else {
            parts.push(SingularPart {
                lambda,
                coeffs: coeffs.iter().map(|b| c * b).collect(),
            });
        }
    }

    /// `self + c other`, merging columns with equal `lambda`.
    pub fn add_scaled(&self, c: f64, other: &KreinField) -> Result<KreinField> {
        self.regular.check_same_grid(&other.regular)?;
        let mut singular = self.singular.clone();
        for p in &other.singular {
            Self::push_part(&mut singular, p.lambda, c, &p.coeffs);
        }
        Ok(KreinField {
            regular: self.regular.add_scaled(c, &other.regular),
            singular,
        })
    }

    pub fn scaled(&self, c: f64) -> KreinField {
        KreinField {
            regular: self.regular.scaled(c),
            singular: self
                .singular
                .iter()
                .map(|p| SingularPart {
                    lambda: p.lambda,
                    coeffs: p.coeffs.iter().map(|v| c * v).collect(),
                })
                .collect(),
        }
    }
}

/// Evaluates pairings of Green columns for one cloud and background.
#[derive(Debug, Clone, Copy)]
pub struct ColumnAlgebra<'a> {
    pub cloud: &'a PointCloud,
    pub bg: Background,
    pub q: QuadratureSpec,
}

impl ColumnAlgebra<'_> {
    fn eval(&self, lambda: f64) -> Result<GreenEval> {
        GreenEval::new(self.bg, self.cloud.d, lambda * lambda, self.q)
    }

    /// `lim (G^mu - G^lambda)(x_i, x_j)` including the diagonal.
    fn green_difference(&self, gm: &GreenEval, gl: &GreenEval, i: usize, j: usize) -> f64 {
        let p = &self.cloud.positions;
        if i == j {
            diag_reg_unchecked(&self.bg, self.cloud.d, gl.s, gm.s, &p[i], &self.q)
        } else {
            gm.green(&p[i], &p[j]) - gl.green(&p[i], &p[j])
        }
    }

    /// Matrix of `<G^mu(., x_i), G^nu(., x_j)>`.
    pub fn gram(&self, mu: f64, nu: f64) -> Result<DMatrix<f64>> {
        let n = self.cloud.len();
        let d = self.cloud.d;
        let p = &self.cloud.positions;
        let rows: Vec<Vec<f64>> = if mu != nu {
            let gm = self.eval(mu)?;
            let gn = self.eval(nu)?;
            let den = mu * mu - nu * nu;
            (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| self.green_difference(&gn, &gm, i, j) / den).collect())
                .collect()
        } else if self.bg.kind == BackgroundKind::Free {
            (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| green_l2_inner(d, mu, dist(&p[i], &p[j]))).collect())
                .collect()
        } else {
            // -dG/ds by a central difference in s
            let s = mu * mu;
            let ds = 1e-4 * (s + self.bg.spectral_bottom(d));
            let gp = GreenEval::new(self.bg, d, s + ds, self.q)?;
            let gm = GreenEval::new(self.bg, d, s - ds, self.q)?;
            (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| self.green_difference(&gm, &gp, i, j) / (2.0 * ds)).collect())
                .collect()
        };
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Samples `sum_i c_i G^lambda(., x_i)` at the grid nodes; a node that
    /// coincides with a point gets the self-node value.
    pub fn sample_columns(&self, lambda: f64, coeffs: &[f64], grid: &Grid) -> Result<GridField> {
        let g = self.eval(lambda)?;
        let d = self.cloud.d;
        let p = &self.cloud.positions;
        let tiny = 1e-9 * grid.h;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let x = grid.point(k);
                p.iter()
                    .zip(coeffs)
                    .map(|(y, c)| {
                        if dist(&x, y) < tiny {
                            c * (lattice_self_average(d, grid.h) + g.regular_part(y))
                        } else {
                            c * g.green(&x, y)
                        }
                    })
                    .sum()
            })
            .collect();
        Ok(GridField { grid: *grid, values })
    }

    /// `||psi||_2^2`, with `<u, G^mu_i>` taken as the interpolated grid
    /// resolvent `(R^mu u)(x_i)`.
    pub fn norm_sq(&self, psi: &KreinField, tol: f64) -> Result<f64> {
        let u = &psi.regular;
        let mut total = u.inner(u);
        for a in &psi.singular {
            let r = GridResolvent::new(&self.bg, u.grid, a.lambda, tol)?.apply(u)?;
            let cross: f64 = self
                .cloud
                .positions
                .iter()
                .zip(&a.coeffs)
                .map(|(x, c)| c * r.interpolate(x))
                .sum();
            total += 2.0 * cross;
            for b in &psi.singular {
                let gram = self.gram(a.lambda, b.lambda)?;
                let ca = nalgebra::DVector::from_column_slice(&a.coeffs);
                let cb = nalgebra::DVector::from_column_slice(&b.coeffs);
                total += ca.dot(&(gram * cb));
            }
        }
        Ok(total)
    }

    pub fn norm(&self, psi: &KreinField, tol: f64) -> Result<f64> {
        Ok(self.norm_sq(psi, tol)?.max(0.0).sqrt())
    }
}

/// Options for Krein resolvents.
#[derive(Debug, Clone, Copy)]
pub struct KreinOptions {
    pub q: QuadratureSpec,
    /// Relative residual of grid solves (trapped background).
    pub tol: f64,
    /// Permits the trapped background, whose Green columns cost one Mehler
    /// quadrature per node and point.
    pub allow_slow: bool,
}

impl Default for KreinOptions {
    fn default() -> Self {
        Self {
            q: QuadratureSpec::default(),
            tol: 1e-10,
            allow_slow: false,
        }
    }
}

/// `R_N^lambda = R_0 + sum_ij [Xi^{-1}]_ij G_i <G_j, .>` for a fixed cloud.
#[derive(Debug, Clone)]
pub struct KreinResolvent<'a> {
    pub algebra: ColumnAlgebra<'a>,
    pub lambda: f64,
    pub s0: f64,
    r0: GridResolvent,
    xi_vals: Vec<f64>,
    xi_vecs: DMatrix<f64>,
    pub condition: f64,
}

impl<'a> KreinResolvent<'a> {
    pub fn new(
        cloud: &'a PointCloud,
        bg: &Background,
        lambda: f64,
        s0: f64,
        grid: Grid,
        opts: &KreinOptions,
    ) -> Result<Self> {
        if bg.kind == BackgroundKind::Harmonic && !opts.allow_slow {
            return Err(Error::Unsupported(
                "Krein resolvent of the trapped background needs the slow path".into(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
        }
        if grid.d != cloud.d {
            return Err(Error::Geometry("cloud and grid dimensions differ".into()));
        }
        let r0 = GridResolvent::new(bg, grid, lambda, opts.tol)?;
        let (xi_vals, xi_vecs, condition) = if cloud.is_empty() {
            (Vec::new(), DMatrix::zeros(0, 0), 1.0)
        } else {
            let xi = crate::xi::assemble_xi(cloud, bg, lambda * lambda, s0, &opts.q)?;
            let se = SymmetricEigen::new(xi.entries);
            let vals: Vec<f64> = se.eigenvalues.iter().copied().collect();
            let amax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let amin = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            let cond = amax / amin;
            if !(cond <= MAX_XI_CONDITION) {
                return Err(Error::NearSingular(cond));
            }
            (vals, se.eigenvectors, cond)
        };
        Ok(Self {
            algebra: ColumnAlgebra { cloud, bg: *bg, q: opts.q },
            lambda,
            s0,
            r0,
            xi_vals,
            xi_vecs,
            condition,
        })
    }

    fn solve_xi(&self, t: &[f64]) -> Vec<f64> {
        let v = &self.xi_vecs;
        let t = nalgebra::DVector::from_column_slice(t);
        let mut y = v.transpose() * t;
        for (k, yk) in y.iter_mut().enumerate() {
            *yk /= self.xi_vals[k];
        }
        (v * y).iter().copied().collect()
    }

    /// Applies `R_N^lambda` to a structured field.
    pub fn apply_structured(&self, psi: &KreinField) -> Result<KreinField> {
        let lam = self.lambda;
        let cloud = self.algebra.cloud;
        let n = cloud.len();
        let r0u = self.r0.apply(&psi.regular)?;
        let mut t: Vec<f64> = cloud.positions.par_iter().map(|x| r0u.interpolate(x)).collect();
        let mut singular: Vec<SingularPart> = Vec::new();
        if !psi.singular.is_empty() {
            let gl = self.algebra.eval(lam)?;
            for part in &psi.singular {
                if part.lambda == lam {
                    return Err(Error::Unsupported(
                        "resolvent applied to a Green column of the same spectral parameter".into(),
                    ));
                }
                let den = lam * lam - part.lambda * part.lambda;
                let gm = self.algebra.eval(part.lambda)?;
                let add: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|j| {
                        (0..n)
                            .map(|i| part.coeffs[i] * self.algebra.green_difference(&gm, &gl, j, i))
                            .sum::<f64>()
                            / den
                    })
                    .collect();
                for (a, b) in t.iter_mut().zip(add) {
                    *a += b;
                }
                KreinField::push_part(&mut singular, part.lambda, 1.0 / den, &part.coeffs);
                KreinField::push_part(&mut singular, lam, -1.0 / den, &part.coeffs);
            }
        }
        if n > 0 {
            let b = self.solve_xi(&t);
            KreinField::push_part(&mut singular, lam, 1.0, &b);
        }
        Ok(KreinField {
            regular: r0u,
            singular,
        })
    }

    /// `R_N^lambda f` sampled on the grid.
    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        let out = self.apply_structured(&KreinField::from_grid(f.clone()))?;
        let mut g = out.regular;
        for part in &out.singular {
            let cols = self.algebra.sample_columns(part.lambda, &part.coeffs, &g.grid)?;
            g = g.add_scaled(1.0, &cols);
        }
        Ok(g)
    }
}

/// `R_N^lambda f` on the grid of `f`.
pub fn krein_apply(
    cloud: &PointCloud,
    bg: &Background,
    lambda: f64,
    s0: f64,
    f: &GridField,
    opts: &KreinOptions,
) -> Result<GridField> {
    KreinResolvent::new(cloud, bg, lambda, s0, f.grid, opts)?.apply(f)
}

/// Solves `(H_grid + lambda^2) u = f` by preconditioned CG.
pub fn limit_resolvent_apply(op: &GridOperator, lambda: f64, f: &GridField, tol: f64) -> Result<GridField> {
    if f.grid != op.grid {
        return Err(Error::Geometry(format!("{:?} vs {:?}", f.grid, op.grid)));
    }
    let s = lambda * lambda;
    let solver = DirichletSolver::new(op.grid);
    let apply = |v: &[f64], out: &mut [f64]| {
        op.apply(v, out);
        linalg::axpy(s, v, out);
    };
    let pre = |r: &[f64], z: &mut [f64]| solver.solve(s, r, z);
    let sol = linalg::pcg(apply, pre, &f.values, tol, 5000)?;
    Ok(GridField {
        grid: f.grid,
        values: sol.x,
    })
}

/// One gap `||R_N f - R_inf f||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub seed: u64,
    pub f_id: String,
    pub gap: f64,
}

pub fn gap_table(rows: &[GapRow]) -> Table {
    let mut t = Table::new(&["N", "seed", "f_id", "gap"]);
    for r in rows {
        t.push(vec![r.n.to_string(), r.seed.to_string(), r.f_id.clone(), fmt_f64(r.gap)]);
    }
    t
}

/// Mean gap per `(N, f_id)` over seeds, in row order.
pub fn mean_gaps(rows: &[GapRow]) -> Vec<(usize, String, f64)> {
    let mut out: Vec<(usize, String, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|o| o.0 == r.n && o.1 == r.f_id) {
            Some(o) => {
                o.2 += r.gap;
                o.3 += 1;
            }
            None => out.push((r.n, r.f_id.clone(), r.gap, 1)),
        }
    }
    out.into_iter().map(|(n, f, s, k)| (n, f, s / k as f64)).collect()
}

/// Gaps between the Krein resolvent of sampled clouds and the grid limit
/// resolvent for each trial function, seeds `sc.seed + k`.
pub fn resolvent_convergence_gap(
    sc: &Scenario,
    n_list: &[usize],
    n_seeds: usize,
    lambda: f64,
    trials: &[(String, GridField)],
    opts: &KreinOptions,
) -> Result<Vec<GapRow>> {
    let grid = match trials.first() {
        Some((_, f)) => f.grid,
        None => return Ok(Vec::new()),
    };
    for (_, f) in trials {
        if f.grid != grid {
            return Err(Error::Geometry("trial functions live on different grids".into()));
        }
    }
    let op = grid_operator(sc, grid.l, grid.h)?;
    let limits = trials
        .iter()
        .map(|(_, f)| limit_resolvent_apply(&op, lambda, f, 1e-10))
        .collect::<Result<Vec<_>>>()?;
    let s0 = sc.lambda0 * sc.lambda0;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    let mut rows = Vec::new();
    for &n in &ns {
        for k in 0..n_seeds as u64 {
            let seed = sc.seed + k;
            let cloud = sample_points(sc, n, seed)?;
            let kr = KreinResolvent::new(&cloud, &sc.background, lambda, s0, grid, opts)?;
            for ((id, f), lim) in trials.iter().zip(&limits) {
                let psi = kr.apply_structured(&KreinField::from_grid(f.clone()))?;
                let diff = psi.add_scaled(-1.0, &KreinField::from_grid(lim.clone()))?;
                rows.push(GapRow {
                    n,
                    seed,
                    f_id: id.clone(),
                    gap: kr.algebra.norm(&diff, opts.tol)?,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid, c: [f64; 3], w: f64) -> GridField {
        GridField::from_fn(grid, |x| {
            let r2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
            (-r2 / (2.0 * w * w)).exp()
        })
    }

    #[test]
    fn empty_cloud_is_free_resolvent() {
        let g = Grid::new(2, 3.0, 0.1).unwrap();
        let f = gaussian(g, [0.2, -0.1, 0.0], 0.5);
        let cloud = PointCloud::from_parts(2, vec![], vec![], 0);
        let a = krein_apply(&cloud, &Background::free(), 2.0, 1.0, &f, &KreinOptions::default()).unwrap();
        let b = free_resolvent_apply(2, 2.0, &f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_resolvent_inverts_discrete_operator() {
        let g = Grid::new(3, 3.0, 0.1).unwrap();
        let f = gaussian(g, [0.0; 3], 0.5);
        let lam = 3.0;
        let u = free_resolvent_apply(3, lam, &f).unwrap();
        let mut lu = vec![0.0; g.len()];
        crate::grid::laplacian_apply(&g, &u.values, &mut lu);
        linalg::axpy(lam * lam, &u.values, &mut lu);
        let r = GridField { grid: g, values: lu }.add_scaled(-1.0, &f);
        assert!(r.norm_l2() <= 5.0 * g.h * g.h * f.norm_l2());
    }

    #[test]
    fn limit_resolvent_spectral_mapping() {
        let g = Grid::new(2, 2.0, 0.1).unwrap();
        let pot: Vec<f64> = (0..g.len()).map(|i| if crate::norm(&g.point(i)) < 0.8 { -5.0 } else { 0.0 }).collect();
        let op = GridOperator::from_potential(g, pot).unwrap();
        let (ev, vecs) = crate::spectra::grid_eigenpairs(&op, 1, 1e-10).unwrap();
        let lam = 1.5;
        let u = limit_resolvent_apply(&op, lam, &vecs[0], 1e-12).unwrap();
        let expect = vecs[0].scaled(1.0 / (ev[0] + lam * lam));
        assert!(u.add_scaled(-1.0, &expect).norm_l2() < 1e-8 * expect.norm_l2());
    }
}
