//! Vector kernels with thread-count independent reductions, preconditioned
//! conjugate gradients and LOBPCG.

use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

const CHUNK: usize = 1 << 13;

/// Dot product summed over fixed-size chunks in a fixed order, so the result
/// does not depend on the number of worker threads.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
        for (p, q) in yc.iter_mut().zip(xc) {
            *p += alpha * q;
        }
    });
}

/// `y = x + beta y`.
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
        for (p, q) in yc.iter_mut().zip(xc) {
            *p = q + beta * *p;
        }
    });
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|c| c.iter_mut().for_each(|v| *v *= alpha));
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct Solve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for an SPD operator.
pub fn pcg<A, P>(apply: A, precond: P, b: &[f64], tol: f64, max_iter: usize) -> Result<Solve>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(Solve {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut best = 1.0;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Parameter("operator is not positive definite".into()));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bnorm;
        best = rel;
        if rel <= tol {
            return Ok(Solve {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        xpby(&z, beta, &mut p);
    }
    Err(Error::NonConvergence {
        what: "preconditioned conjugate gradients".into(),
        residual: best,
    })
}

/// Lowest eigenpairs of an SPD-shiftable symmetric operator.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Orthonormalizes `cols` in order by twice-repeated modified Gram–Schmidt,
/// applying the same combinations to `images` (their operator images).
/// Columns that become numerically dependent are dropped.
fn orthonormalize(cols: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>) {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    let mut aq: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for (mut v, mut av) in cols.drain(..).zip(images.drain(..)) {
        let orig = norm2(&v);
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for (qi, aqi) in q.iter().zip(&aq) {
                let c = dot(qi, &v);
                axpy(-c, qi, &mut v);
                axpy(-c, aqi, &mut av);
            }
        }
        let nv = norm2(&v);
        if nv < 1e-10 * orig {
            continue;
        }
        scale(1.0 / nv, &mut v);
        scale(1.0 / nv, &mut av);
        q.push(v);
        aq.push(av);
    }
    *cols = q;
    *images = aq;
}

fn combine(basis: &[Vec<f64>], coef: &DMatrix<f64>, col: usize, rows: std::ops::Range<usize>) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for r in rows {
        let c = coef[(r, col)];
        if c != 0.0 {
            axpy(c, &basis[r], &mut out);
        }
    }
    out
}

/// Block LOBPCG for the `k` lowest eigenpairs of `apply`, preconditioned by
/// `precond`, starting from the block `x0` (`x0.len() >= k`). Converged when
/// `||A v - theta v|| <= tol ||v||` for the first `k` Ritz pairs.
pub fn lobpcg<A, P>(apply: A, precond: P, x0: Vec<Vec<f64>>, k: usize, tol: f64, max_iter: usize) -> Result<Eigenpairs>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let m = x0.len();
    assert!(m >= k && k >= 1);
    let n = x0[0].len();
    let image = |v: &[f64]| {
        let mut out = vec![0.0; n];
        apply(v, &mut out);
        out
    };
    let mut x = x0;
    let mut ax: Vec<Vec<f64>> = x.iter().map(|v| image(v)).collect();
    orthonormalize(&mut x, &mut ax);
    if x.len() < k {
        return Err(Error::Parameter("starting block is rank deficient".into()));
    }
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut ap: Vec<Vec<f64>> = Vec::new();
    let mut theta = vec![0.0; x.len()];
    let mut best = f64::INFINITY;
    for it in 0..=max_iter {
        // Rayleigh–Ritz on span[X, W, P]
        let mut basis: Vec<Vec<f64>> = x.clone();
        let mut images: Vec<Vec<f64>> = ax.clone();
        if it > 0 {
            // residuals were turned into W at the end of the previous pass
            basis.extend(p.iter().cloned());
            images.extend(ap.iter().cloned());
        }
        let nx = x.len();
        orthonormalize(&mut basis, &mut images);
        let dim = basis.len();
        let mut g = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let se = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let keep = nx.min(dim);
        let coef = DMatrix::from_fn(dim, keep, |r, c| se.eigenvectors[(r, order[c])]);
        let new_x: Vec<Vec<f64>> = (0..keep).map(|c| combine(&basis, &coef, c, 0..dim)).collect();
        let new_ax: Vec<Vec<f64>> = (0..keep).map(|c| combine(&images, &coef, c, 0..dim)).collect();
        let nprev = nx.min(dim);
        let new_p: Vec<Vec<f64>> = if dim > nprev {
            (0..keep).map(|c| combine(&basis, &coef, c, nprev..dim)).collect()
        } else {
            Vec::new()
        };
        let new_ap: Vec<Vec<f64>> = if dim > nprev {
            (0..keep).map(|c| combine(&images, &coef, c, nprev..dim)).collect()
        } else {
            Vec::new()
        };
        theta = (0..keep).map(|c| se.eigenvalues[order[c]]).collect();
        x = new_x;
        ax = new_ax;
        // periodic refresh of the images against drift
        if it % 16 == 15 {
            ax = x.iter().map(|v| image(v)).collect();
        }
        let mut res = Vec::with_capacity(keep);
        let mut w = Vec::with_capacity(keep);
        for c in 0..keep {
            let mut r = ax[c].clone();
            axpy(-theta[c], &x[c], &mut r);
            res.push(norm2(&r) / norm2(&x[c]));
            w.push(r);
        }
        best = res[..k].iter().cloned().fold(0.0, f64::max);
        if best <= tol {
            return Ok(Eigenpairs {
                values: theta[..k].to_vec(),
                vectors: x[..k].to_vec(),
                residuals: res[..k].to_vec(),
                iterations: it,
            });
        }
        // next search directions: preconditioned residuals and momentum
        let mut tw: Vec<Vec<f64>> = Vec::with_capacity(keep);
        for r in &w {
            let mut z = vec![0.0; n];
            precond(r, &mut z);
            tw.push(z);
        }
        let atw: Vec<Vec<f64>> = tw.iter().map(|v| image(v)).collect();
        p = tw;
        ap = atw;
        p.extend(new_p);
        ap.extend(new_ap);
    }
    let _ = theta;
    Err(Error::NonConvergence {
        what: "LOBPCG".into(),
        residual: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1d(n: usize) -> impl Fn(&[f64], &mut [f64]) {
        move |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { v[i - 1] } else { 0.0 };
                let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = 2.0 * v[i] - l - r + 0.01 * i as f64 * v[i];
            }
        }
    }

    #[test]
    fn dot_is_chunk_ordered() {
        let a: Vec<f64> = (0..50_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..50_000).map(|i| (i as f64 * 0.3).cos()).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| dot(&a, &b));
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| dot(&a, &b));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let n = 200;
        let a = lap1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let sol = pcg(&a, |r: &[f64], z: &mut [f64]| z.copy_from_slice(r), &b, 1e-12, 2000).unwrap();
        let mut ax = vec![0.0; n];
        a(&sol.x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-11 * norm2(&b));
    }

    #[test]
    fn lobpcg_matches_dense() {
        let n = 60;
        let a = lap1d(n);
        let mut dense = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut col = vec![0.0; n];
            a(&e, &mut col);
            for i in 0..n {
                dense[(i, j)] = col[i];
            }
        }
        let mut ev: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let x0: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..n).map(|i| ((i + 1) as f64 * (k + 1) as f64 * 0.37).sin()).collect())
            .collect();
        let out = lobpcg(&a, |r: &[f64], z: &mut [f64]| z.copy_from_slice(r), x0, 3, 1e-9, 500).unwrap();
        for k in 0..3 {
            assert!((out.values[k] - ev[k]).abs() < 1e-12, "{k}: {} vs {}", out.values[k], ev[k]);
        }
    }
}
