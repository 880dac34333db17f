//! Uniform Dirichlet box grids, sampled fields and the fast transforms used
//! on them (DST-I for the box Laplacian, zero-padded FFT convolution for the
//! free resolvent).

use crate::kernels::{free_regular_part, g_free};
use crate::linalg;
use crate::{Error, Point, Result};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Lattice constant of the simple cubic Green function at the origin, in the
/// form `G_h(0) = C3 / (4 pi h)`.
const LATTICE_C3: f64 = 2.837_297_479_480_6;
/// Square-lattice constant: the discrete Green function of `-Delta_h + l^2`
/// at the origin behaves like `(C2 - ln h - ln(l / 2) - gamma) / (2 pi)`.
const LATTICE_C2: f64 = 1.310_532_925_9;

/// Box `[-L, L]^d` with `n` interior nodes per axis at `-L + (i+1) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub l: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(d: usize, l: f64, h: f64) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(Error::Domain(format!("grid dimension {d} is not 2 or 3")));
        }
        if !(l > 0.0 && h > 0.0 && l.is_finite() && h.is_finite()) {
            return Err(Error::Parameter(format!("grid needs L > 0 and h > 0, got L={l}, h={h}")));
        }
        let cells = (2.0 * l / h + 1e-9).floor();
        if cells < 2.0 || cells > 1e5 {
            return Err(Error::Parameter(format!("grid with L={l}, h={h} has {cells} cells per axis")));
        }
        Ok(Self {
            d,
            l,
            h,
            n: cells as usize - 1,
        })
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l + (i + 1) as f64 * self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Per-axis indices of a flat index (last axis fastest).
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn point(&self, idx: usize) -> Point {
        let mi = self.multi_index(idx);
        let mut p = [0.0; 3];
        for a in 0..self.d {
            p[a] = self.coord(mi[a]);
        }
        p
    }

    /// Largest sup-norm radius that keeps `margin` cells to the box wall.
    pub fn inner_halfwidth(&self, margin: usize) -> f64 {
        self.l - margin as f64 * self.h
    }
}

/// Real samples at the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: Fn(&Point) -> f64 + Sync>(grid: Grid, f: F) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Geometry(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// `h^d sum u v`.
    pub fn inner(&self, other: &GridField) -> f64 {
        self.grid.cell_volume() * linalg::dot(&self.values, &other.values)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, c: f64) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.par_iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c other`.
    pub fn add_scaled(&self, c: f64, other: &GridField) -> GridField {
        let mut values = self.values.clone();
        linalg::axpy(c, &other.values, &mut values);
        GridField { grid: self.grid, values }
    }

    pub fn map<F: Fn(&Point, f64) -> f64 + Sync>(&self, f: F) -> GridField {
        let g = self.grid;
        GridField {
            grid: g,
            values: self.values.par_iter().enumerate().map(|(i, v)| f(&g.point(i), *v)).collect(),
        }
    }

    /// Multilinear interpolation with zero Dirichlet data on the box wall.
    pub fn interpolate(&self, x: &Point) -> f64 {
        let g = &self.grid;
        let mut base = [0isize; 3];
        let mut frac = [0.0; 3];
        for a in 0..g.d {
            let t = (x[a] + g.l) / g.h - 1.0;
            let f = t.floor();
            base[a] = f as isize;
            frac[a] = t - f;
        }
        let n = g.n as isize;
        let mut acc = 0.0;
        for corner in 0..(1usize << g.d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut inside = true;
            for a in 0..g.d {
                let bit = (corner >> a) & 1;
                let i = base[a] + bit as isize;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                if i < 0 || i >= n {
                    inside = false;
                }
                idx = idx * g.n + i.max(0) as usize;
            }
            if inside && w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Maximum distance of the support (nonzero nodes) from the box wall, in
    /// cells; `None` for the zero field.
    pub fn support_margin(&self) -> Option<usize> {
        let g = &self.grid;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| {
                let mi = g.multi_index(i);
                (0..g.d).map(|a| mi[a].min(g.n - 1 - mi[a])).min().unwrap_or(0)
            })
            .min()
    }
}

/// `out = -Delta_h v` with the (2d+1)-point stencil and zero boundary data.
pub fn laplacian_apply(grid: &Grid, v: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let d = grid.d;
    let ih2 = 1.0 / (grid.h * grid.h);
    let strides: Vec<usize> = (0..d).map(|a| n.pow((d - 1 - a) as u32)).collect();
    out.par_chunks_mut(n).enumerate().for_each(|(line, chunk)| {
        let base = line * n;
        let mut mi = [0usize; 3];
        let mut rest = line;
        for a in (0..d - 1).rev() {
            mi[a] = rest % n;
            rest /= n;
        }
        for (k, o) in chunk.iter_mut().enumerate() {
            let idx = base + k;
            let c = v[idx];
            let mut acc = 2.0 * d as f64 * c;
            if k > 0 {
                acc -= v[idx - 1];
            }
            if k + 1 < n {
                acc -= v[idx + 1];
            }
            for a in 0..d - 1 {
                let s = strides[a];
                if mi[a] > 0 {
                    acc -= v[idx - s];
                }
                if mi[a] + 1 < n {
                    acc -= v[idx + s];
                }
            }
            *o = acc * ih2;
        }
    });
}

/// Runs `f` on every line of a `m^d` array along `axis`, in batches of
/// `batch` lines gathered into a contiguous buffer. Lines are visited in a
/// fixed order and written back afterwards, so the result is independent of
/// the worker count.
fn for_each_line_batch<T, S, I, F>(data: &mut [T], m: usize, d: usize, axis: usize, batch: usize, init: I, f: F)
where
    T: Copy + Send + Sync + Default,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut [T]) + Sync + Send,
{
    let stride = m.pow((d - 1 - axis) as u32);
    let lines = m.pow((d - 1) as u32);
    let start = |l: usize| (l / stride) * m * stride + l % stride;
    let n_batches = lines.div_ceil(batch);
    let src: &[T] = data;
    let out: Vec<Vec<T>> = (0..n_batches)
        .into_par_iter()
        .map_init(&init, |st, b| {
            let first = b * batch;
            let count = batch.min(lines - first);
            let mut buf = vec![T::default(); count * m];
            for c in 0..count {
                let s0 = start(first + c);
                for i in 0..m {
                    buf[c * m + i] = src[s0 + i * stride];
                }
            }
            f(st, &mut buf);
            buf
        })
        .collect();
    for (b, buf) in out.iter().enumerate() {
        let first = b * batch;
        for c in 0..buf.len() / m {
            let s0 = start(first + c);
            for i in 0..m {
                data[s0 + i * stride] = buf[c * m + i];
            }
        }
    }
}

/// Unnormalized DST-I of length `n`: `S_k = sum_j x_j sin(pi j k / (n+1))`,
/// evaluated with one complex FFT of length `2(n+1)` per pair of lines.
#[derive(Clone)]
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dst1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dst1({})", self.n)
    }
}

struct DstScratch {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    fn scratch(&self) -> DstScratch {
        DstScratch {
            buf: vec![Complex64::default(); 2 * (self.n + 1)],
            scratch: vec![Complex64::default(); self.fft.get_inplace_scratch_len()],
        }
    }

    /// Transforms one or two lines held back to back in `lines`.
    fn lines(&self, st: &mut DstScratch, lines: &mut [f64]) {
        let n = self.n;
        let two = lines.len() == 2 * n;
        let buf = &mut st.buf;
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for j in 0..n {
            let a = lines[j];
            let b = if two { lines[n + j] } else { 0.0 };
            buf[j + 1] = Complex64::new(a, b);
            buf[2 * n + 1 - j] = Complex64::new(-a, -b);
        }
        self.fft.process_with_scratch(buf, &mut st.scratch);
        for k in 0..n {
            let y = buf[k + 1];
            lines[k] = -0.5 * y.im;
            if two {
                lines[n + k] = 0.5 * y.re;
            }
        }
    }

    /// In-place transform of a single line.
    pub fn apply(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let mut st = self.scratch();
        self.lines(&mut st, x);
    }

    /// In-place transform along every axis of an `n^d` array.
    pub fn apply_all_axes(&self, data: &mut [f64], d: usize) {
        let n = self.n;
        for axis in 0..d {
            for_each_line_batch(data, n, d, axis, 2, || self.scratch(), |st, buf| self.lines(st, buf));
        }
    }
}

/// Exact inverse of `-Delta_h + c` on a Dirichlet grid, `c > -lambda_min`.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    grid: Grid,
    dst: Dst1,
    eig1: Vec<f64>,
}

impl DirichletSolver {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n;
        let h = grid.h;
        let eig1 = (1..=n)
            .map(|m| {
                let s = (std::f64::consts::PI * m as f64 / (2.0 * (n + 1) as f64)).sin();
                4.0 / (h * h) * s * s
            })
            .collect();
        Self {
            grid,
            dst: Dst1::new(n),
            eig1,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Smallest eigenvalue of `-Delta_h`.
    pub fn lowest_eigenvalue(&self) -> f64 {
        self.grid.d as f64 * self.eig1[0]
    }

    /// Eigenvalue of `-Delta_h` for the mode with per-axis wave numbers
    /// `m[a] >= 1`.
    pub fn mode_eigenvalue(&self, m: &[usize]) -> f64 {
        m.iter().map(|&k| self.eig1[k - 1]).sum()
    }

    /// `out = (-Delta_h + c)^{-1} f`.
    pub fn solve(&self, c: f64, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.n;
        let d = g.d;
        out.copy_from_slice(f);
        self.dst.apply_all_axes(out, d);
        let norm = (2.0 / (n + 1) as f64).powi(d as i32);
        let eig = &self.eig1;
        out.par_chunks_mut(n).enumerate().for_each(|(line, chunk)| {
            let mut rest = line;
            let mut lam = c;
            for _ in 0..d - 1 {
                lam += eig[rest % n];
                rest /= n;
            }
            for (k, v) in chunk.iter_mut().enumerate() {
                *v *= norm / (lam + eig[k]);
            }
        });
        self.dst.apply_all_axes(out, d);
    }
}

fn is_smooth(mut m: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

/// Node-sum stand-in for the cell average of `zeta0` at the self node:
/// the near-origin constant of the lattice Green function.
pub fn lattice_self_average(d: usize, h: f64) -> f64 {
    match d {
        3 => LATTICE_C3 / (4.0 * std::f64::consts::PI * h),
        _ => (LATTICE_C2 - h.ln()) / (2.0 * std::f64::consts::PI),
    }
}

/// Weight of the self node in the free-resolvent convolution: the lattice
/// constant plus the regular remainder of `g_free` at zero separation.
pub fn self_node_weight(d: usize, lambda: f64, h: f64) -> f64 {
    h.powi(d as i32) * (lattice_self_average(d, h) + free_regular_part(d, lambda))
}

/// Discrete convolution with `g_free^lambda` on a grid, evaluated with a
/// zero-padded FFT. The kernel transform is computed once.
#[derive(Clone)]
pub struct FreeConvolution {
    grid: Grid,
    lambda: f64,
    m: usize,
    kernel_hat: Arc<Vec<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FreeConvolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreeConvolution")
            .field("grid", &self.grid)
            .field("lambda", &self.lambda)
            .field("padded", &self.m)
            .finish()
    }
}

struct FftScratch {
    scratch: Vec<Complex64>,
}

impl FreeConvolution {
    pub fn new(grid: Grid, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("free resolvent needs lambda > 0, got {lambda}")));
        }
        let n = grid.n;
        let d = grid.d;
        let mut m = 2 * n - 1;
        while !is_smooth(m) {
            m += 1;
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let h = grid.h;
        let vol = grid.cell_volume();
        let self_w = self_node_weight(d, lambda, h);
        let total = m.pow(d as u32);
        let mut k: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut rest = idx;
                let mut r2 = 0.0;
                let mut inside = true;
                for _ in 0..d {
                    let i = rest % m;
                    rest /= m;
                    let off = if i < n { i as f64 } else if i + n > m { i as f64 - m as f64 } else {
                        inside = false;
                        0.0
                    };
                    r2 += off * off;
                }
                if !inside {
                    Complex64::default()
                } else if r2 == 0.0 {
                    Complex64::new(self_w, 0.0)
                } else {
                    Complex64::new(vol * g_free(d, lambda, h * r2.sqrt()), 0.0)
                }
            })
            .collect();
        fft_all_axes(&mut k, m, d, &fwd);
        let scale = 1.0 / total as f64;
        let kernel_hat = k.iter().map(|c| c.re * scale).collect();
        Ok(Self {
            grid,
            lambda,
            m,
            kernel_hat: Arc::new(kernel_hat),
            fwd,
            inv,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `out(x) = sum_y w(x - y) f(y)` with `w` the node weights above.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let d = self.grid.d;
        let m = self.m;
        let total = m.pow(d as u32);
        let mut buf = vec![Complex64::default(); total];
        for (idx, v) in f.iter().enumerate() {
            if *v != 0.0 {
                let mut rest = idx;
                let mut p = 0;
                let mut mul = 1;
                for _ in 0..d {
                    p += (rest % n) * mul;
                    rest /= n;
                    mul *= m;
                }
                buf[p] = Complex64::new(*v, 0.0);
            }
        }
        fft_all_axes(&mut buf, m, d, &self.fwd);
        let kh = &self.kernel_hat;
        buf.par_iter_mut().zip(kh.par_iter()).for_each(|(b, k)| *b *= *k);
        fft_all_axes(&mut buf, m, d, &self.inv);
        let mut out = vec![0.0; f.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let mut rest = idx;
            let mut p = 0;
            let mut mul = 1;
            for _ in 0..d {
                p += (rest % n) * mul;
                rest /= n;
                mul *= m;
            }
            *o = buf[p].re;
        }
        out
    }
}

fn fft_all_axes(data: &mut [Complex64], m: usize, d: usize, fft: &Arc<dyn Fft<f64>>) {
    for axis in 0..d {
        for_each_line_batch(
            data,
            m,
            d,
            axis,
            8,
            || FftScratch {
                scratch: vec![Complex64::default(); fft.get_inplace_scratch_len()],
            },
            |st, buf| fft.process_with_scratch(buf, &mut st.scratch),
        );
    }
}
