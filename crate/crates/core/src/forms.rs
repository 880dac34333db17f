//! The singular forms `Q_N^lambda`, the limit form `Q_inf^lambda`, the
//! recovery sequence and the Gamma-limsup experiment.
//!
//! A form element represents `psi = phi + (1/N) sum_j p_j G^lambda(., x_j)`.
//! All forms are shifted by `lambda^2 ||psi||^2`, so that
//! `Q_N^lambda[psi] = Q_0[phi] + lambda^2 ||phi||^2 + (1/N^2) p^T Xi p`.

use crate::grid::{laplacian_apply, GridField};
use crate::kernels::QuadratureSpec;
use crate::linalg;
use crate::resolvent::{free_resolvent_apply, ColumnAlgebra, KreinField, SingularPart};
use crate::sampling::{sample_points, PointCloud};
use crate::scenario::{Background, BackgroundKind, Scenario};
use crate::table::{fmt_f64, Table};
use crate::xi::{assemble_xi, XiMatrix};
use crate::{Error, Result};
use nalgebra::DVector;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct FormElement<'a> {
    pub regular: GridField,
    pub charges: Vec<f64>,
    pub lambda: f64,
    pub cloud: &'a PointCloud,
}

impl<'a> FormElement<'a> {
    pub fn new(regular: GridField, charges: Vec<f64>, lambda: f64, cloud: &'a PointCloud) -> Result<Self> {
        if charges.len() != cloud.len() {
            return Err(Error::Parameter(format!(
                "{} charges for a cloud of {} points",
                charges.len(),
                cloud.len()
            )));
        }
        if regular.grid.d != cloud.d {
            return Err(Error::Geometry("element grid and cloud dimensions differ".into()));
        }
        Ok(Self {
            regular,
            charges,
            lambda,
            cloud,
        })
    }

    /// `self + c other`; both must share the cloud and `lambda`.
    pub fn add_scaled(&self, c: f64, other: &FormElement<'a>) -> Result<FormElement<'a>> {
        self.regular.check_same_grid(&other.regular)?;
        if self.lambda != other.lambda || !std::ptr::eq(self.cloud, other.cloud) {
            return Err(Error::Parameter("form elements differ in lambda or cloud".into()));
        }
        Ok(FormElement {
            regular: self.regular.add_scaled(c, &other.regular),
            charges: self.charges.iter().zip(&other.charges).map(|(a, b)| a + c * b).collect(),
            lambda: self.lambda,
            cloud: self.cloud,
        })
    }

    pub fn scaled(&self, c: f64) -> FormElement<'a> {
        FormElement {
            regular: self.regular.scaled(c),
            charges: self.charges.iter().map(|v| c * v).collect(),
            lambda: self.lambda,
            cloud: self.cloud,
        }
    }

    /// The structured representation used by the resolvent module.
    pub fn to_krein_field(&self) -> KreinField {
        let n = self.cloud.len().max(1) as f64;
        KreinField {
            regular: self.regular.clone(),
            singular: vec![SingularPart {
                lambda: self.lambda,
                coeffs: self.charges.iter().map(|p| p / n).collect(),
            }],
        }
    }
}

/// `<phi, (H_0 + lambda^2 + W) phi>` on the grid, with the gradient taken
/// by forward differences (including the links to the zero wall), which
/// equals `<phi, -Delta_h phi>`.
fn grid_energy<W: Fn(&crate::Point) -> f64 + Sync>(phi: &GridField, lambda: f64, w: W) -> f64 {
    let g = &phi.grid;
    let mut lap = vec![0.0; g.len()];
    laplacian_apply(g, &phi.values, &mut lap);
    let pot: Vec<f64> = phi
        .values
        .par_iter()
        .enumerate()
        .map(|(i, v)| (w(&g.point(i)) + lambda * lambda) * v)
        .collect();
    linalg::axpy(1.0, &pot, &mut lap);
    g.cell_volume() * linalg::dot(&phi.values, &lap)
}

/// `Q_0[phi] = ||grad phi||^2 + <phi, V_bg phi>` on the grid.
pub fn q0_eval(phi: &GridField, bg: &Background) -> f64 {
    grid_energy(phi, 0.0, |x| bg.potential(x))
}

/// `Q_N^lambda[psi]` for an element and `Xi` assembled at `s = lambda^2`.
pub fn qn_eval(elem: &FormElement, xi: &XiMatrix, bg: &Background) -> Result<f64> {
    let n = elem.cloud.len();
    if xi.n != n {
        return Err(Error::Geometry(format!("Xi of size {} for {n} charges", xi.n)));
    }
    if (xi.s - elem.lambda * elem.lambda).abs() > 1e-12 * xi.s.abs().max(1.0) {
        return Err(Error::Parameter(format!(
            "Xi assembled at s = {} but the element has lambda^2 = {}",
            xi.s,
            elem.lambda * elem.lambda
        )));
    }
    let regular = grid_energy(&elem.regular, elem.lambda, |x| bg.potential(x));
    if n == 0 {
        return Ok(regular);
    }
    let p = DVector::from_column_slice(&elem.charges);
    let sing = p.dot(&(&xi.entries * &p)) / (n as f64 * n as f64);
    Ok(regular + sing)
}

/// `||psi||_2^2` of an element (free background).
pub fn psi_norm_sq(elem: &FormElement, bg: &Background, q: &QuadratureSpec) -> Result<f64> {
    let alg = ColumnAlgebra {
        cloud: elem.cloud,
        bg: *bg,
        q: *q,
    };
    alg.norm_sq(&elem.to_krein_field(), 1e-10)
}

/// `Q_inf^lambda[psi] = ||grad psi||^2 + <psi, (V_bg - U/a + lambda^2) psi>`.
pub fn qinf_eval(psi: &GridField, sc: &Scenario, lambda: f64) -> Result<f64> {
    if psi.grid.d != sc.d {
        return Err(Error::Geometry("field and scenario dimensions differ".into()));
    }
    let (lo, hi) = sc.density.bounding_box(sc.d);
    let inner = psi.grid.inner_halfwidth(4);
    if (0..sc.d).any(|a| lo[a] < -inner || hi[a] > inner) {
        return Err(Error::Config("support of U violates the 4-cell margin rule".into()));
    }
    Ok(grid_energy(psi, lambda, |x| sc.limit_potential(x)))
}

/// The recovery sequence at a cloud: `p_j = psi_inf(x_j) / a(x_j)` and
/// `phi = psi_inf - R_0^lambda(U psi_inf / a)`.
pub fn recovery_sequence<'a>(
    psi_inf: &GridField,
    cloud: &'a PointCloud,
    sc: &Scenario,
    lambda: f64,
) -> Result<FormElement<'a>> {
    if sc.background.kind != BackgroundKind::Free {
        return Err(Error::Unsupported("recovery sequences need the free background".into()));
    }
    let g = &psi_inf.grid;
    let wall = g.l - 2.0 * g.h;
    for (j, x) in cloud.positions.iter().enumerate() {
        if (0..g.d).any(|a| x[a].abs() > wall) {
            return Err(Error::Interpolation { index: j });
        }
    }
    let charges = cloud
        .positions
        .iter()
        .map(|x| psi_inf.interpolate(x) / sc.strength_at(x))
        .collect();
    let source = psi_inf.map(|x, v| {
        let u = sc.density_at(x);
        if u > 0.0 {
            u * v / sc.strength_at(x)
        } else {
            0.0
        }
    });
    let phi = psi_inf.add_scaled(-1.0, &free_resolvent_apply(sc.d, lambda, &source)?);
    FormElement::new(phi, charges, lambda, cloud)
}

/// One `(N, seed)` cell of the Gamma-limsup experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub n: usize,
    pub seed: u64,
    pub qn: f64,
    pub qinf: f64,
    /// `||psi_N - psi_inf||_2`.
    pub distance: f64,
}

impl GammaRow {
    pub fn gap(&self) -> f64 {
        (self.qn - self.qinf).abs()
    }
}

pub fn gamma_table(rows: &[GammaRow]) -> Table {
    let mut t = Table::new(&["N", "seed", "QN", "Qinf", "gap"]);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            r.seed.to_string(),
            fmt_f64(r.qn),
            fmt_f64(r.qinf),
            fmt_f64(r.gap()),
        ]);
    }
    t
}

pub fn distance_table(rows: &[GammaRow]) -> Table {
    let mut t = Table::new(&["N", "seed", "distance"]);
    for r in rows {
        t.push(vec![r.n.to_string(), r.seed.to_string(), fmt_f64(r.distance)]);
    }
    t
}

/// `|Q_N^lambda[psi_N] - Q_inf^lambda[psi_inf]|` along the recovery sequence
/// for every `N` and seeds `sc.seed + k`.
pub fn gamma_limsup_gap(
    sc: &Scenario,
    psi_inf: &GridField,
    n_list: &[usize],
    n_seeds: usize,
    lambda: f64,
    q: &QuadratureSpec,
) -> Result<Vec<GammaRow>> {
    let qinf = qinf_eval(psi_inf, sc, lambda)?;
    let s0 = sc.lambda0 * sc.lambda0;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    let mut rows = Vec::new();
    for &n in &ns {
        for k in 0..n_seeds as u64 {
            let seed = sc.seed + k;
            let cloud = sample_points(sc, n, seed)?;
            let elem = recovery_sequence(psi_inf, &cloud, sc, lambda)?;
            let xi = assemble_xi(&cloud, &sc.background, lambda * lambda, s0, q)?;
            let qn = qn_eval(&elem, &xi, &sc.background)?;
            let diff = elem.to_krein_field().add_scaled(-1.0, &KreinField::from_grid(psi_inf.clone()))?;
            let alg = ColumnAlgebra {
                cloud: &cloud,
                bg: sc.background,
                q: *q,
            };
            rows.push(GammaRow {
                n,
                seed,
                qn,
                qinf,
                distance: alg.norm(&diff, 1e-10)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn single_charge_form() {
        let g = Grid::new(3, 1.0, 0.25).unwrap();
        let cloud = PointCloud::from_parts(3, vec![[0.0; 3]], vec![-1.0 / (4.0 * PI) + 0.3], 0);
        let lam = 2.5;
        let xi = assemble_xi(&cloud, &Background::free(), lam * lam, 1.0, &QuadratureSpec::default()).unwrap();
        let e = FormElement::new(GridField::zeros(g), vec![1.0], lam, &cloud).unwrap();
        let v = qn_eval(&e, &xi, &Background::free()).unwrap();
        let expect = -1.0 / (4.0 * PI) + 0.3 + (lam - 1.0) / (4.0 * PI);
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn quadratic_homogeneity_and_polarization() {
        let g = Grid::new(3, 1.5, 0.1).unwrap();
        let cloud = PointCloud::from_parts(3, vec![[0.1, 0.0, 0.0], [-0.3, 0.2, 0.1]], vec![4.0, 5.0], 0);
        let lam = 3.0;
        let xi = assemble_xi(&cloud, &Background::free(), lam * lam, 1.0, &QuadratureSpec::default()).unwrap();
        let a = FormElement::new(GridField::from_fn(g, |x| (-x[0] * x[0] - 2.0 * x[1] * x[1] - x[2] * x[2]).exp()), vec![0.7, -0.2], lam, &cloud).unwrap();
        let b = FormElement::new(GridField::from_fn(g, |x| x[0] * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()), vec![0.1, 0.4], lam, &cloud).unwrap();
        let bg = Background::free();
        let qa = qn_eval(&a, &xi, &bg).unwrap();
        let qb = qn_eval(&b, &xi, &bg).unwrap();
        let q3 = qn_eval(&a.scaled(3.0), &xi, &bg).unwrap();
        assert!((q3 - 9.0 * qa).abs() < 1e-12 * qa.abs());
        let plus = qn_eval(&a.add_scaled(1.0, &b).unwrap(), &xi, &bg).unwrap();
        let minus = qn_eval(&a.add_scaled(-1.0, &b).unwrap(), &xi, &bg).unwrap();
        assert!((plus + minus - 2.0 * qa - 2.0 * qb).abs() < 1e-10 * (qa.abs() + qb.abs()));
    }
}
