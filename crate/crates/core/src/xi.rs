//! The interaction matrix `Xi_N` and its coerciveness diagnostics.

use crate::kernels::{diag_reg_unchecked, GreenEval, QuadratureSpec};
use crate::sampling::PointCloud;
use crate::scenario::Background;
use crate::table::{fmt_f64, Table};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// `Xi_N` at `s = lambda^2` with reference `s0 = lambda_0^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    pub n: usize,
    pub s: f64,
    pub s0: f64,
    pub entries: DMatrix<f64>,
}

/// Assembles `Xi_jj = alpha_j + lim (G^{lambda_0} - G^lambda)(x_j, x_j)` and
/// `Xi_ij = -G^lambda(x_i, x_j)`. Each pair is evaluated once and mirrored.
pub fn assemble_xi(cloud: &PointCloud, bg: &Background, s: f64, s0: f64, q: &QuadratureSpec) -> Result<XiMatrix> {
    let n = cloud.len();
    let d = cloud.d;
    let g = GreenEval::new(*bg, d, s, *q)?;
    GreenEval::new(*bg, d, s0, *q)?;
    let pos = &cloud.positions;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(n - i);
            row.push(cloud.strengths[i] + diag_reg_unchecked(bg, d, s, s0, &pos[i], q));
            for j in (i + 1)..n {
                row.push(-g.green(&pos[i], &pos[j]));
            }
            row
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        m[(i, i)] = row[0];
        for (k, v) in row[1..].iter().enumerate() {
            let j = i + 1 + k;
            m[(i, j)] = *v;
            m[(j, i)] = *v;
        }
    }
    Ok(XiMatrix { n, s, s0, entries: m })
}

impl XiMatrix {
    /// Sorted eigenvalues of `Xi` (unscaled).
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Sorted eigenpairs; eigenvectors are the columns of the matrix.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let se = SymmetricEigen::new(self.entries.clone());
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let vals = idx.iter().map(|&k| se.eigenvalues[k]).collect();
        let vecs = DMatrix::from_fn(self.n, self.n, |r, c| se.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    /// Whether `Xi` is positive definite (Cholesky succeeds).
    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.entries.clone()).is_some()
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.entries.norm()
    }

    /// Condition number from the extreme eigenvalue magnitudes.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        max / min
    }

    /// Debug dump `i,j,entry` for small matrices.
    pub fn dump_table(&self) -> Result<Table> {
        if self.n > 64 {
            return Err(Error::Unsupported(format!("matrix dump limited to N <= 64, got {}", self.n)));
        }
        let mut t = Table::new(&["i", "j", "entry"]);
        for i in 0..self.n {
            for j in 0..self.n {
                t.push(vec![i.to_string(), j.to_string(), fmt_f64(self.entries[(i, j)])]);
            }
        }
        Ok(t)
    }
}

/// Smallest eigenvalue of `Xi / N`.
pub fn min_eigenvalue_scaled(xi: &XiMatrix) -> f64 {
    if xi.n == 0 {
        return f64::INFINITY;
    }
    xi.eigenvalues()[0] / xi.n as f64
}

/// `(1/N) sqrt(sum_{i != j} Xi_ij^2)`, the Hilbert–Schmidt norm of the
/// scaled off-diagonal part.
pub fn offdiag_hs_norm_scaled(xi: &XiMatrix) -> f64 {
    let n = xi.n;
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                let v = xi.entries[(i, j)];
                sum += v * v;
            }
        }
    }
    sum.sqrt() / n as f64
}

/// Whether `Xi / N - threshold` is positive definite.
pub fn scaled_at_least(xi: &XiMatrix, threshold: f64) -> bool {
    let n = xi.n as f64;
    let mut m = xi.entries.scale(1.0 / n);
    for k in 0..xi.n {
        m[(k, k)] -= threshold;
    }
    Cholesky::new(m).is_some()
}

/// One `(N, lambda)` diagnostic of a coerciveness scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub lambda: f64,
    pub min_eigenvalue_scaled: f64,
    pub offdiag_hs_norm_scaled: f64,
}

/// Result of [`coercive_onset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Onset {
    /// Smallest `lambda` of the scan grid with `min_eigenvalue_scaled >=
    /// threshold` at `lambda` and `2 lambda` for every cloud.
    pub lambda_star: Option<f64>,
    pub threshold: f64,
    /// Diagnostics at `lambda_star` and `2 lambda_star`, or at the last two
    /// scanned values when no onset was found.
    pub rows: Vec<ScanRow>,
}

fn diagnostics(cloud: &PointCloud, bg: &Background, lambda: f64, s0: f64, q: &QuadratureSpec) -> Result<ScanRow> {
    let xi = assemble_xi(cloud, bg, lambda * lambda, s0, q)?;
    Ok(ScanRow {
        n: cloud.len(),
        lambda,
        min_eigenvalue_scaled: min_eigenvalue_scaled(&xi),
        offdiag_hs_norm_scaled: offdiag_hs_norm_scaled(&xi),
    })
}

/// Empirical onset of equi-coerciveness over a set of clouds. The scan
/// visits `lambdas` in order; positivity is tested by Cholesky and the
/// reported diagnostics use full eigensolves.
pub fn coercive_onset(
    clouds: &[PointCloud],
    bg: &Background,
    s0: f64,
    lambdas: &[f64],
    threshold: f64,
    q: &QuadratureSpec,
) -> Result<Onset> {
    let ok = |lambda: f64| -> Result<bool> {
        for c in clouds {
            if !scaled_at_least(&assemble_xi(c, bg, lambda * lambda, s0, q)?, threshold) {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut star = None;
    for &l in lambdas {
        if ok(l)? && ok(2.0 * l)? {
            star = Some(l);
            break;
        }
    }
    let at = star.or_else(|| lambdas.last().copied());
    let mut rows = Vec::new();
    if let Some(l) = at {
        for lam in [l, 2.0 * l] {
            let r: Vec<ScanRow> = clouds
                .par_iter()
                .map(|c| diagnostics(c, bg, lam, s0, q))
                .collect::<Result<_>>()?;
            rows.extend(r);
        }
    }
    Ok(Onset {
        lambda_star: star,
        threshold,
        rows,
    })
}

/// `min_eigenvalue_scaled` and `offdiag_hs_norm_scaled` along a lambda grid.
pub fn xi_scan(cloud: &PointCloud, bg: &Background, s0: f64, lambdas: &[f64], q: &QuadratureSpec) -> Result<Vec<ScanRow>> {
    lambdas.par_iter().map(|&l| diagnostics(cloud, bg, l, s0, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;
    use std::f64::consts::PI;

    fn cloud(pts: Vec<Point>, alpha: Vec<f64>) -> PointCloud {
        PointCloud::from_parts(3, pts, alpha, 0)
    }

    fn xi_from(m: DMatrix<f64>) -> XiMatrix {
        XiMatrix {
            n: m.nrows(),
            s: 1.0,
            s0: 1.0,
            entries: m,
        }
    }

    #[test]
    fn one_center_vanishes_at_root() {
        let c = cloud(vec![[0.0; 3]], vec![-1.0 / (4.0 * PI)]);
        let xi = assemble_xi(&c, &Background::free(), 4.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(xi.entries[(0, 0)].abs() < 1e-16);
        assert_eq!(min_eigenvalue_scaled(&xi), xi.entries[(0, 0)]);
    }

    #[test]
    fn pair_offdiagonal() {
        let c = cloud(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![2.0, 2.0]);
        let xi = assemble_xi(&c, &Background::free(), 1.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((xi.entries[(0, 1)] + (-1.0f64).exp() / (4.0 * PI)).abs() < 1e-16);
        assert_eq!(xi.entries[(0, 1)], xi.entries[(1, 0)]);
        assert_eq!(xi.entries[(0, 0)], 2.0);
        assert_eq!(xi.entries[(1, 1)], 2.0);
    }

    #[test]
    fn scaled_eigenvalue_examples() {
        let xi = xi_from(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        assert!((min_eigenvalue_scaled(&xi) - 1.0).abs() < 1e-15);
        let (a, b) = (1.3, 0.4);
        let xi = xi_from(DMatrix::from_row_slice(2, 2, &[a, -b, -b, a]));
        assert!((min_eigenvalue_scaled(&xi) - (a - b) / 2.0).abs() < 1e-15);
        assert!((offdiag_hs_norm_scaled(&xi) - b / 2f64.sqrt()).abs() < 1e-15);
        let xi = xi_from(DMatrix::from_row_slice(1, 1, &[0.0]));
        assert_eq!(min_eigenvalue_scaled(&xi), 0.0);
        assert_eq!(offdiag_hs_norm_scaled(&xi), 0.0);
    }

    #[test]
    fn dump_is_limited() {
        let xi = xi_from(DMatrix::identity(3, 3));
        assert_eq!(xi.dump_table().unwrap().rows.len(), 9);
        let xi = xi_from(DMatrix::identity(65, 65));
        assert!(xi.dump_table().is_err());
    }
}
