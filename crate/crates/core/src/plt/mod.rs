//! Square-to-square transport through the partial Legendre transform.
//!
//! For `u` the Brenier potential on `Q = [0,1]^2`, the transform
//! `u*(p, x2) = sup_x1 (p x1 - u(x1, x2))` solves the quasi-linear equation
//!
//! ```text
//! f(d1 u*, x2) d11 u* + g(p, -d2 u*) d22 u* = 0
//! d1 u* = 0 on p = 0,  d1 u* = 1 on p = 1,  d2 u* = 0 on x2 = 0,  d2 u* = -1 on x2 = 1.
//! ```
//!
//! It is discretized in conservation form `dp F(d1 u*, x2) - d2 G(p, -d2 u*) = 0`
//! with `F`, `G` the antiderivatives of `f`, `g` in their first and second
//! argument, by vertex-centred finite volumes (half cells on the edges). On
//! the analytic density family the secant slopes `F(s)/s` and `G(s)/s` are
//! exact means, so every Picard step is a weighted graph Laplacian solve.

mod corner;
mod invert;
mod multigrid;

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{OtError, Result};
use crate::exec::Exec;
use crate::geometry::{build_domain, DomainSpec};
use crate::probes::push_row;

use multigrid::{FaceCoefficients, Hierarchy};

pub use corner::{corner_obstruction_report, d11_at_origin, mixed_fourth, CornerGrid, CornerReport, CORNER_OFFSETS};
pub use invert::{invert_plt, PltMap};

/// Node values on the closed unit square; `values[j * n + i]` sits at
/// `(p, x2) = (i h, j h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid {
    pub n: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 9 {
            return Err(OtError::param(format!("grid needs at least 9 nodes per side, got {n}")));
        }
        if values.len() != n * n {
            return Err(OtError::param("grid values do not match the node count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OtError::param("grid values must be finite"));
        }
        Ok(ScalarGrid {
            n,
            h: 1.0 / (n - 1) as f64,
            values,
        })
    }

    /// Samples `f(p, x2)` at the nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = 1.0 / (n.max(2) - 1) as f64;
        let values = (0..n * n).map(|v| f((v % n) as f64 * h, (v / n) as f64 * h)).collect();
        ScalarGrid::new(n, values)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn coord(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Smallest second difference in `p` over nodes with `0 < i < n - 1`.
    pub fn min_second_difference_p(&self) -> f64 {
        let n = self.n;
        let mut lo = f64::INFINITY;
        for j in 0..n {
            for i in 1..n - 1 {
                lo = lo.min(self.at(i + 1, j) - 2.0 * self.at(i, j) + self.at(i - 1, j));
            }
        }
        lo
    }

    /// CSV matrix: header `x2` followed by the `p` coordinates, then one row
    /// per `x2`.
    pub fn to_csv(&self) -> String {
        let n = self.n;
        let mut out = String::from("x2");
        for i in 0..n {
            out.push(',');
            out.push_str(&crate::probes::fmt_f64(self.coord(i)));
        }
        out.push('\n');
        let mut row = Vec::with_capacity(n + 1);
        for j in 0..n {
            row.clear();
            row.push(self.coord(j));
            row.extend_from_slice(&self.values[j * n..(j + 1) * n]);
            push_row(&mut out, &row);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PltOptions {
    pub n: usize,
    /// Bound on the max-norm residual of the discrete equation, per unit area.
    pub tol: f64,
    pub relaxation: f64,
    pub max_iterations: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl PltOptions {
    pub fn new(n: usize, tol: f64) -> Self {
        PltOptions {
            n,
            tol,
            ..PltOptions::default()
        }
    }
}

impl Default for PltOptions {
    fn default() -> Self {
        PltOptions {
            n: 129,
            tol: 1e-10,
            relaxation: 0.5,
            max_iterations: 500,
            exec: Exec::default(),
        }
    }
}

/// Solved transform with its convergence record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PltSolution {
    pub ustar: ScalarGrid,
    pub f: DensityField,
    pub g: DensityField,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Preconditioned CG iterations summed over the Picard steps.
    pub linear_iterations: usize,
    /// Picard steps whose linear solve stopped at its iteration cap.
    pub inexact_linear_solves: usize,
    /// `u*(0, 0)`, always 0.
    pub gauge: f64,
}

pub fn solve_plt(f: &DensityField, g: &DensityField, n: usize, tol: f64) -> Result<ScalarGrid> {
    solve_plt_with(f, g, &PltOptions::new(n, tol)).map(|s| s.ustar)
}

/// Picard iteration: freeze the secant coefficients at the current iterate,
/// solve the linear Neumann problem, relax.
pub fn solve_plt_with(f: &DensityField, g: &DensityField, opts: &PltOptions) -> Result<PltSolution> {
    let n = opts.n;
    if n < 9 {
        return Err(OtError::param(format!("grid needs at least 9 nodes per side, got {n}")));
    }
    if !(opts.tol > 0.0) || !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(OtError::param("tol must be positive and relaxation in (0, 1]"));
    }
    let q = build_domain(&DomainSpec::Square { side: 1.0 })?;
    f.check_positive(&q)?;
    g.check_positive(&q)?;
    let (mf, mg) = (f.integrate_polygon(&q), g.integrate_polygon(&q));
    if (mf - mg).abs() > 1e-10 * mf {
        return Err(OtError::param(format!("densities are not mass balanced: {mf} vs {mg}")));
    }
    let h = 1.0 / (n - 1) as f64;
    let problem = Problem { f, g, n, h };
    let b = problem.boundary_flux();
    let area = problem.areas();
    let mut u: Vec<f64> = (0..n * n)
        .map(|v| {
            let (p, x2) = ((v % n) as f64 * h, (v / n) as f64 * h);
            0.5 * (p * p - x2 * x2)
        })
        .collect();
    let mut history = Vec::new();
    let (mut linear_iterations, mut inexact_linear_solves) = (0usize, 0usize);
    for it in 0..=opts.max_iterations {
        let coeffs = problem.coefficients(&u);
        let hier = Hierarchy::new(&coeffs, opts.exec);
        let residual = problem.residual(&hier, &u, &b, &area);
        history.push(residual);
        if residual <= opts.tol {
            gauge(&mut u);
            let ustar = ScalarGrid::new(n, u)?;
            return Ok(PltSolution {
                ustar,
                f: f.clone(),
                g: g.clone(),
                iterations: it,
                residual,
                residual_history: history,
                linear_iterations,
                inexact_linear_solves,
                gauge: 0.0,
            });
        }
        if it == opts.max_iterations || !residual.is_finite() {
            break;
        }
        let mut v = u.clone();
        let inner_tol = (0.01 * residual).max(0.05 * opts.tol);
        let lin = hier.solve(&b, &mut v, &area, inner_tol, 200);
        linear_iterations += lin.iterations;
        inexact_linear_solves += usize::from(!lin.converged);
        for (uv, vv) in u.iter_mut().zip(&v) {
            *uv += opts.relaxation * (vv - *uv);
        }
        gauge(&mut u);
        let grid = ScalarGrid { n, h, values: u.clone() };
        let convexity = grid.min_second_difference_p();
        if !(convexity > 0.0) {
            return Err(OtError::diagnostic(format!(
                "Picard iterate {} lost convexity in p (min second difference {convexity:e})",
                it + 1
            )));
        }
    }
    Err(OtError::NonConvergence {
        solver: "Picard (partial Legendre transform)",
        iterations: opts.max_iterations,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

fn gauge(u: &mut [f64]) {
    let u0 = u[0];
    u.iter_mut().for_each(|v| *v -= u0);
}

struct Problem<'a> {
    f: &'a DensityField,
    g: &'a DensityField,
    n: usize,
    h: f64,
}

impl Problem<'_> {
    fn width(&self, k: usize) -> f64 {
        if k == 0 || k == self.n - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Midpoint of the transverse extent of node `k`'s control volume.
    fn centre(&self, k: usize) -> f64 {
        let x = k as f64 * self.h;
        if k == 0 {
            0.25 * self.h
        } else if k == self.n - 1 {
            x - 0.25 * self.h
        } else {
            x
        }
    }

    fn areas(&self) -> Vec<f64> {
        let n = self.n;
        (0..n * n).map(|v| self.width(v % n) * self.width(v / n)).collect()
    }

    /// Outward Neumann fluxes: `int F(1, x2) dx2` on `p = 1` and
    /// `-int G(p, 1) dp` on `x2 = 1`; the other two edges carry none.
    /// Both integrands are affine, so the midpoint rule is exact.
    fn boundary_flux(&self) -> Vec<f64> {
        let n = self.n;
        let mut b = vec![0.0; n * n];
        for j in 0..n {
            b[j * n + n - 1] += self.width(j) * self.f.mean_along_x1(1.0, self.centre(j));
        }
        for i in 0..n {
            b[(n - 1) * n + i] -= self.width(i) * self.g.mean_along_x2(self.centre(i), 1.0);
        }
        b
    }

    /// Secant coefficients `F(s, x2)/s` and `G(p, s)/s` on every face.
    fn coefficients(&self, u: &[f64]) -> FaceCoefficients {
        let (n, h) = (self.n, self.h);
        let mut along_p = vec![0.0; n * (n - 1)];
        let mut along_x2 = vec![0.0; (n - 1) * n];
        for j in 0..n {
            let x2 = j as f64 * h;
            for i in 0..n - 1 {
                let s = (u[j * n + i + 1] - u[j * n + i]) / h;
                along_p[j * (n - 1) + i] = self.f.mean_along_x1(s, x2);
            }
        }
        for j in 0..n - 1 {
            for i in 0..n {
                let s = -(u[(j + 1) * n + i] - u[j * n + i]) / h;
                along_x2[j * n + i] = self.g.mean_along_x2(i as f64 * h, s);
            }
        }
        FaceCoefficients { n, along_p, along_x2 }
    }

    /// `max_v |(L(u) u - b)_v| / area_v`.
    fn residual(&self, hier: &Hierarchy, u: &[f64], b: &[f64], area: &[f64]) -> f64 {
        let mut lu = vec![0.0; u.len()];
        hier.apply(u, &mut lu);
        debug_assert_eq!(hier.n(), self.n);
        lu.iter()
            .zip(b)
            .zip(area)
            .map(|((l, bv), a)| (l - bv).abs() / a)
            .fold(0.0, f64::max)
    }
}
