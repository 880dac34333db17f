//! Schrödinger operators with `N` zero-range scatterers and their
//! homogenization limit `H_0 - U/a`.
//!
//! Units are `hbar = 2m = 1`, so the background is `H_0 = -Delta` or
//! `H_0 = -Delta + w^2 |x|^2` and energies are inverse squared lengths.
//! Points are stored as `[f64; 3]`; in two dimensions the third coordinate
//! is zero.

pub mod bessel;
pub mod error;
pub mod forms;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod quad;
pub mod resolvent;
pub mod sampling;
pub mod scenario;
pub mod spectra;
pub mod table;
pub mod xi;

pub use error::{Error, Result};

/// A point in `R^d`, `d <= 3`, padded with zeros.
pub type Point = [f64; 3];

/// Euclidean distance between two padded points.
#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Euclidean norm of a padded point.
#[inline]
pub fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
