//! Finite-difference witness of the missing third derivative at the corner.
//!
//! Write `f = c0 + c1 x1 x2` and `c = g(0) / c0`. Differentiating the
//! transformed equation once in `p` and once in `x2` and using `d1 u* = 0`
//! on `p = 0` gives, at the origin,
//!
//! ```text
//! d1112 u* + c d2221 u* = -(c1 / c0) (d11 u*(0))^2
//! ```
//!
//! while the Neumann data differentiated along the two edges force the same
//! combination to vanish there if `u*` were `C^4` up to the corner. The
//! report tabulates the interior combination next to the corner on a
//! sequence of grids; a value that stays away from 0 under refinement is
//! the obstruction.

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{OtError, Result};
use crate::geometry::Point;

use super::{solve_plt_with, PltOptions, ScalarGrid};

/// Node offsets `(k, k)` at which the interior combination is evaluated.
pub const CORNER_OFFSETS: [usize; 3] = [2, 3, 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerGrid {
    pub n: usize,
    pub h: f64,
    /// One-sided second-order estimate of `d11 u*(0, 0)`.
    pub d11_origin: f64,
    /// `(k, d1112 u* + c d2221 u*)` at node `(k, k)`.
    pub interior: Vec<(usize, f64)>,
    /// `|interior - boundary_trace|` per offset.
    pub mismatch: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerReport {
    pub f: DensityField,
    pub g: DensityField,
    /// `g(0) / f(0)`.
    pub ratio: f64,
    /// Value of the combination forced by the edge data.
    pub boundary_trace: f64,
    /// `-(c1 / c0) (d11 u*(0))^2` on the finest grid.
    pub equation_value: f64,
    pub grids: Vec<CornerGrid>,
}

impl CornerReport {
    pub fn finest(&self) -> Option<&CornerGrid> {
        self.grids.iter().max_by_key(|g| g.n)
    }
}

/// `(2 u_0 - 5 u_1 + 4 u_2 - u_3) / h^2` along the bottom row.
pub fn d11_at_origin(u: &ScalarGrid) -> f64 {
    (2.0 * u.at(0, 0) - 5.0 * u.at(1, 0) + 4.0 * u.at(2, 0) - u.at(3, 0)) / (u.h * u.h)
}

/// `D12 (D11 u + c D22 u)` at node `(k, k)`, `k >= 2`.
pub fn mixed_fourth(u: &ScalarGrid, k: usize, c: f64) -> f64 {
    let h2 = u.h * u.h;
    let w = |i: usize, j: usize| {
        let d11 = (u.at(i + 1, j) - 2.0 * u.at(i, j) + u.at(i - 1, j)) / h2;
        let d22 = (u.at(i, j + 1) - 2.0 * u.at(i, j) + u.at(i, j - 1)) / h2;
        d11 + c * d22
    };
    (w(k + 1, k + 1) - w(k + 1, k - 1) - w(k - 1, k + 1) + w(k - 1, k - 1)) / (4.0 * h2)
}

pub fn corner_obstruction_report(f: &DensityField, g: &DensityField, grids: &[usize], tol: f64) -> Result<CornerReport> {
    if grids.is_empty() {
        return Err(OtError::param("at least one grid size is required"));
    }
    if let Some(&n) = grids.iter().find(|&&n| n < 2 * CORNER_OFFSETS[2] + 2) {
        return Err(OtError::param(format!("grid {n} is too coarse for the corner stencils")));
    }
    let (c0, c1) = f.coefficients();
    let ratio = g.eval(Point::new(0.0, 0.0)) / c0;
    let mut out = Vec::with_capacity(grids.len());
    for &n in grids {
        let s = solve_plt_with(f, g, &PltOptions::new(n, tol))?;
        let u = &s.ustar;
        let interior: Vec<(usize, f64)> = CORNER_OFFSETS.iter().map(|&k| (k, mixed_fourth(u, k, ratio))).collect();
        out.push(CornerGrid {
            n,
            h: u.h,
            d11_origin: d11_at_origin(u),
            mismatch: interior.iter().map(|&(_, e)| e.abs()).collect(),
            interior,
            residual: s.residual,
            iterations: s.iterations,
        });
    }
    let finest = out.iter().max_by_key(|g| g.n).map(|g| g.d11_origin).unwrap_or(0.0);
    Ok(CornerReport {
        f: f.clone(),
        g: g.clone(),
        ratio,
        boundary_trace: 0.0,
        equation_value: -(c1 / c0) * finest * finest,
        grids: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_are_exact_on_quartics() {
        // u = p^3 x2 + 2 p x2^3: d1112 = 6, d2221 = 12.
        let u = ScalarGrid::from_fn(33, |p, x2| p * p * p * x2 + 2.0 * p * x2 * x2 * x2).unwrap();
        for k in CORNER_OFFSETS {
            assert!((mixed_fourth(&u, k, 0.5) - (6.0 + 0.5 * 12.0)).abs() < 1e-6);
        }
        let v = ScalarGrid::from_fn(33, |p, x2| 0.7 * p * p + p * p * p - x2).unwrap();
        assert!((d11_at_origin(&v) - 1.4).abs() < 1e-9);
    }

    #[test]
    fn uniform_control_has_no_mismatch() {
        let one = DensityField::constant(1.0);
        let r = corner_obstruction_report(&one, &one, &[17, 33], 1e-12).unwrap();
        for g in &r.grids {
            assert!((g.d11_origin - 1.0).abs() < 1e-9);
            assert!(g.mismatch.iter().all(|m| *m <= 1e-8));
        }
        assert_eq!(r.equation_value, 0.0);
    }
}
