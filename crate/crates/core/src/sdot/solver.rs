//! Damped Newton iteration on the Kantorovich dual.
//!
//! The dual variables are the power weights `w`. The gradient of the
//! concave dual is `nu - m(w)` (target minus cell masses); its Hessian is
//! the weighted graph Laplacian with edge weights
//! `int_{facet ij} f / (2 |y_i - y_j|)`. Newton steps are halved until
//! every cell keeps at least half of the smallest mass seen so far and the
//! residual decreases by the factor `1 - alpha/2`.

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{OtError, Result};
use crate::exec::{ordered_sum, Exec};
use crate::geometry::{Point, Polygon};

use super::laguerre::{build_unchecked, LaguerreDiagram};
use super::measure::DiscreteMeasure;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Converged when `max_i |m_i - nu_i| <= tol * total / N`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Smallest Newton step fraction before falling back to gradient ascent.
    pub damping_floor: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iterations: 100,
            damping_floor: (2.0f64).powi(-20),
            exec: Exec::default(),
        }
    }
}

/// Iteration record of a dual solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// `max_i |m_i - nu_i|` before each iteration and at exit.
    pub residual_history: Vec<f64>,
    /// Accepted step fractions.
    pub step_history: Vec<f64>,
    pub gradient_fallbacks: usize,
    /// Largest `|sum m_i - int_X f| / int_X f` seen over all iterates.
    pub worst_mass_defect: f64,
}

pub fn solve_dual(source: &Polygon, f: &DensityField, target: &DiscreteMeasure, opts: &SolverOptions) -> Result<LaguerreDiagram> {
    solve_dual_with_stats(source, f, target, opts).map(|(d, _)| d)
}

pub fn solve_dual_with_stats(
    source: &Polygon,
    f: &DensityField,
    target: &DiscreteMeasure,
    opts: &SolverOptions,
) -> Result<(LaguerreDiagram, SolveStats)> {
    if target.is_empty() {
        return Err(OtError::param("target measure has no sites"));
    }
    if !(opts.tol > 0.0) || !(opts.damping_floor > 0.0 && opts.damping_floor < 1.0) {
        return Err(OtError::param("tol must be positive and damping floor in (0,1)"));
    }
    if let Some((i, j)) = target.duplicate_pair() {
        return Err(OtError::param(format!("sites {i} and {j} coincide")));
    }
    f.check_positive(source)?;
    let source_mass = f.integrate_polygon(source);
    let target_mass = target.total_mass();
    if (source_mass - target_mass).abs() > 1e-8 * source_mass {
        return Err(OtError::param(format!(
            "mass imbalance: source {source_mass}, target {target_mass}"
        )));
    }
    let exec = opts.exec;
    let n = target.len();
    let sites = &target.sites;
    let nu = &target.masses;
    let threshold = opts.tol * target_mass / n as f64;
    let mut stats = SolveStats::default();

    let mut weights = initial_weights(source, sites);
    let mut diagram = build_unchecked(source, f, sites, &weights, exec);
    let defect = |d: &LaguerreDiagram| (d.total_mass() - source_mass).abs() / source_mass;
    stats.worst_mass_defect = defect(&diagram);
    let min_nu = nu.iter().copied().fold(f64::INFINITY, f64::min);

    for it in 0..=opts.max_iterations {
        let residual: Vec<f64> = nu.iter().zip(&diagram.masses).map(|(t, m)| t - m).collect();
        let max_res = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        stats.residual_history.push(max_res);
        if max_res <= threshold {
            stats.iterations = it;
            normalize_gauge(&mut diagram.weights);
            return Ok((diagram, stats));
        }
        if it == opts.max_iterations {
            break;
        }
        let norm = l2(&residual);
        let hessian = Laplacian::from_diagram(&diagram);
        let min_mass = diagram.masses.iter().copied().fold(f64::INFINITY, f64::min);
        let floor_mass = 0.5 * min_mass.min(min_nu);
        let direction = hessian.solve(&residual);

        let mut alpha = 1.0;
        let mut accepted = None;
        if let Some(dir) = &direction {
            while alpha >= opts.damping_floor {
                let trial: Vec<f64> = weights.iter().zip(dir).map(|(w, d)| w + alpha * d).collect();
                let cand = build_unchecked(source, f, sites, &trial, exec);
                let min_m = cand.masses.iter().copied().fold(f64::INFINITY, f64::min);
                let r_new: Vec<f64> = nu.iter().zip(&cand.masses).map(|(t, m)| t - m).collect();
                if min_m >= floor_mass && l2(&r_new) <= (1.0 - 0.5 * alpha) * norm {
                    accepted = Some((trial, cand));
                    break;
                }
                alpha *= 0.5;
            }
        }
        let (trial, cand) = match accepted {
            Some(x) => x,
            None => {
                stats.gradient_fallbacks += 1;
                alpha = 0.0;
                gradient_step(source, f, sites, &weights, &residual, &hessian, floor_mass, exec)
            }
        };
        stats.step_history.push(alpha);
        weights = trial;
        diagram = cand;
        stats.worst_mass_defect = stats.worst_mass_defect.max(defect(&diagram));
    }
    stats.iterations = opts.max_iterations;
    let residual = *stats.residual_history.last().unwrap_or(&f64::NAN);
    Err(OtError::NonConvergence {
        solver: "damped Newton (semi-discrete dual)",
        iterations: opts.max_iterations,
        residual,
        history: stats.residual_history,
    })
}

fn l2(v: &[f64]) -> f64 {
    ordered_sum(v.iter().map(|x| x * x)).sqrt()
}

fn normalize_gauge(w: &mut [f64]) {
    let w0 = w[0];
    for x in w.iter_mut() {
        *x -= w0;
    }
}

/// Weights making every cell non-empty: the power diagram equals the
/// Voronoi diagram of the sites shrunk affinely into the source, and each
/// shrunk site lies in its own cell.
pub(crate) fn initial_weights(source: &Polygon, sites: &[Point]) -> Vec<f64> {
    let n = sites.len();
    let voronoi = vec![0.0; n];
    if sites.iter().all(|&s| source.contains(s, 0.0)) {
        // Voronoi cells of sites inside the source contain their sites.
        return voronoi;
    }
    let inner = source.centroid().unwrap_or_default();
    let mut lo = sites[0];
    let mut hi = sites[0];
    for p in sites {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let center = (lo + hi) * 0.5;
    let mut lambda = 1.0;
    for _ in 0..200 {
        let shrunk = |y: Point| inner + (y - center) * lambda;
        if sites.iter().all(|&y| {
            let z = shrunk(y);
            source.contains(z, 0.0) && source.boundary_distance(z) > 0.0
        }) {
            let mut w: Vec<f64> = sites.iter().map(|&y| y.norm2() - shrunk(y).norm2() / lambda).collect();
            normalize_gauge(&mut w);
            return w;
        }
        lambda *= 0.5;
    }
    voronoi
}

#[allow(clippy::too_many_arguments)]
fn gradient_step(
    source: &Polygon,
    f: &DensityField,
    sites: &[Point],
    weights: &[f64],
    residual: &[f64],
    hessian: &Laplacian,
    floor_mass: f64,
    exec: Exec,
) -> (Vec<f64>, LaguerreDiagram) {
    let max_diag = hessian.diag.iter().copied().fold(0.0f64, f64::max).max(1e-300);
    let mut tau = 0.5 / max_diag;
    loop {
        let trial: Vec<f64> = weights.iter().zip(residual).map(|(w, r)| w + tau * r).collect();
        let cand = build_unchecked(source, f, sites, &trial, exec);
        let min_m = cand.masses.iter().copied().fold(f64::INFINITY, f64::min);
        if min_m >= floor_mass || tau < 1e-30 {
            return (trial, cand);
        }
        tau *= 0.5;
    }
}

/// Sparse symmetric graph Laplacian `H` of the cell adjacency.
pub(crate) struct Laplacian {
    diag: Vec<f64>,
    start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Laplacian {
    pub(crate) fn from_diagram(d: &LaguerreDiagram) -> Self {
        let n = d.len();
        let facets = d.facets();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, fs) in facets.iter().enumerate() {
            for fct in fs {
                let j = fct.neighbor;
                if j <= i {
                    continue;
                }
                let back = facets[j].iter().find(|g| g.neighbor == i).map(|g| g.flux).unwrap_or(0.0);
                let flux = 0.5 * (fct.flux + back);
                let c = flux / (2.0 * d.sites[i].dist(d.sites[j]));
                if c > 0.0 {
                    rows[i].push((j, c));
                    rows[j].push((i, c));
                }
            }
        }
        // Facets only seen from the higher-indexed side.
        for (i, fs) in facets.iter().enumerate() {
            for fct in fs {
                let j = fct.neighbor;
                if j < i && !facets[j].iter().any(|g| g.neighbor == i) {
                    let c = 0.5 * fct.flux / (2.0 * d.sites[i].dist(d.sites[j]));
                    if c > 0.0 {
                        rows[i].push((j, c));
                        rows[j].push((i, c));
                    }
                }
            }
        }
        let mut diag = vec![0.0; n];
        let mut start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        start.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            for (j, c) in row {
                diag[i] += c;
                cols.push(j);
                vals.push(c);
            }
            start.push(cols.len());
        }
        Laplacian { diag, start, cols, vals }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.diag.len() {
            let mut s = self.diag[i] * x[i];
            for k in self.start[i]..self.start[i + 1] {
                s -= self.vals[k] * x[self.cols[k]];
            }
            out[i] = s;
        }
    }

    /// Solves `H d = b` in the zero-mean subspace by Jacobi-preconditioned CG;
    /// returns `d` with `d_0 = 0`.
    pub(crate) fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = b.len();
        let mean = ordered_sum(b.iter().copied()) / n as f64;
        let rhs: Vec<f64> = b.iter().map(|v| v - mean).collect();
        let bnorm = l2(&rhs);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Some(x);
        }
        let inv: Vec<f64> = self.diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        let project = |v: &mut [f64]| {
            let m = ordered_sum(v.iter().copied()) / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
        };
        let mut r = rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
        project(&mut z);
        let mut p = z.clone();
        let mut rz: f64 = ordered_sum(r.iter().zip(&z).map(|(a, b)| a * b));
        let mut hp = vec![0.0; n];
        let max_iter = 20 * n + 100;
        let mut converged = false;
        for _ in 0..max_iter {
            self.apply(&p, &mut hp);
            let php = ordered_sum(p.iter().zip(&hp).map(|(a, b)| a * b));
            if !(php > 0.0) {
                break;
            }
            let a = rz / php;
            for i in 0..n {
                x[i] += a * p[i];
                r[i] -= a * hp[i];
            }
            if l2(&r) <= 1e-12 * bnorm {
                converged = true;
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv[i];
            }
            project(&mut z);
            let rz_new = ordered_sum(r.iter().zip(&z).map(|(a, b)| a * b));
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // A stalled solve still gives a usable ascent direction if the
        // residual dropped substantially.
        if !converged && l2(&r) > 1e-3 * bnorm {
            return None;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let x0 = x[0];
        x.iter_mut().for_each(|v| *v -= x0);
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use crate::sdot::{laguerre_diagram, sample_target};
    use approx::assert_relative_eq;

    fn unit_square() -> Polygon {
        build_domain(&DomainSpec::Square { side: 1.0 }).unwrap()
    }

    #[test]
    fn quadrants_converge_immediately() {
        let q = unit_square();
        let one = DensityField::constant(1.0);
        let nu = sample_target(&q, &one, 4).unwrap();
        let (d, stats) = solve_dual_with_stats(&q, &one, &nu, &SolverOptions::default()).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(d.weights.iter().all(|&w| w == 0.0));
        for c in &d.cells {
            assert_relative_eq!(c.area(), 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_site_takes_everything() {
        let q = unit_square();
        let y = Point::new(7.0, -3.0);
        let nu = DiscreteMeasure::new(vec![y], vec![1.0]).unwrap();
        let d = solve_dual(&q, &DensityField::constant(1.0), &nu, &SolverOptions::default()).unwrap();
        assert_eq!(d.eval_map(Point::new(0.3, 0.9)).unwrap(), y);
    }

    #[test]
    fn imbalance_is_a_parameter_error() {
        let q = unit_square();
        let nu = DiscreteMeasure::new(vec![Point::new(0.5, 0.5)], vec![1.1]).unwrap();
        let r = solve_dual(&q, &DensityField::constant(1.0), &nu, &SolverOptions::default());
        assert!(matches!(r, Err(OtError::Parameter(_))));
    }

    #[test]
    fn non_convergence_reports_history() {
        let q = unit_square();
        let one = DensityField::constant(1.0);
        let f = DensityField::affine_product(1.0);
        let nu = sample_target(&q, &one, 400).unwrap().rescaled(1.25);
        let opts = SolverOptions {
            max_iterations: 1,
            tol: 1e-14,
            ..SolverOptions::default()
        };
        match solve_dual(&q, &f, &nu, &opts) {
            Err(OtError::NonConvergence { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn non_uniform_source_converges_and_conserves_mass() {
        let q = unit_square();
        let f = DensityField::affine_product(1.0);
        let nu = sample_target(&q, &DensityField::constant(1.25), 900).unwrap();
        let opts = SolverOptions::default();
        let (d, stats) = solve_dual_with_stats(&q, &f, &nu, &opts).unwrap();
        let thr = opts.tol * nu.total_mass() / nu.len() as f64;
        for (m, t) in d.masses.iter().zip(&nu.masses) {
            assert!((m - t).abs() <= thr);
        }
        assert!(stats.worst_mass_defect <= 1e-8);
        assert_eq!(d.weights[0], 0.0);
    }

    #[test]
    fn sites_outside_the_source_get_nonempty_initial_cells() {
        let x = build_domain(&DomainSpec::Disc { radius: 1.0, arc_vertices: 64 }).unwrap();
        let y = build_domain(&DomainSpec::Dumbbell { eps: 0.1, arc_vertices: 64 }).unwrap();
        let nu = sample_target(&y, &DensityField::constant(1.0), 300).unwrap();
        let w = initial_weights(&x, &nu.sites);
        let d = laguerre_diagram(&x, &DensityField::constant(1.0), &nu.sites, &w).unwrap();
        assert_eq!(d.nonempty_cells(), nu.len());
    }
}
