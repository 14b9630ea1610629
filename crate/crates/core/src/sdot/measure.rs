use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{OtError, Result};
use crate::exec::{ordered_sum, Exec};
use crate::geometry::{HalfPlane, Point, Polygon};

/// Largest grid used to discretize a target.
pub const MAX_GRID_CELLS: usize = 100_000_000;

/// Weighted point cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub sites: Vec<Point>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(sites: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if sites.is_empty() {
            return Err(OtError::param("a discrete measure needs at least one site"));
        }
        if sites.len() != masses.len() {
            return Err(OtError::param("sites and masses differ in length"));
        }
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(OtError::param(format!("site masses must be positive, found {m}")));
        }
        if sites.iter().any(|p| !p.is_finite()) {
            return Err(OtError::param("site coordinates must be finite"));
        }
        let m = DiscreteMeasure { sites, masses };
        if let Some((i, j)) = m.duplicate_pair() {
            return Err(OtError::param(format!("sites {i} and {j} coincide")));
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        ordered_sum(self.masses.iter().copied())
    }

    /// Multiplies all masses by `factor`.
    pub fn rescaled(&self, factor: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            sites: self.sites.clone(),
            masses: self.masses.iter().map(|m| m * factor).collect(),
        }
    }

    pub(crate) fn duplicate_pair(&self) -> Option<(usize, usize)> {
        duplicate_pair(&self.sites)
    }
}

pub(crate) fn duplicate_pair(sites: &[Point]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| {
        sites[a]
            .x
            .total_cmp(&sites[b].x)
            .then(sites[a].y.total_cmp(&sites[b].y))
    });
    order
        .windows(2)
        .find(|w| sites[w[0]] == sites[w[1]])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// Discretizes `g` on `target` with a uniform grid of about `n` cells.
///
/// The grid covers the bounding box of `target` with square-ish cells of
/// side `sqrt(area / n)`; each cell is clipped to the target, and every
/// non-empty piece contributes one site at its centroid carrying the exact
/// integral of `g` over the piece.
pub fn sample_target(target: &Polygon, g: &DensityField, n: usize) -> Result<DiscreteMeasure> {
    sample_target_with(target, g, n, Exec::default())
}

pub fn sample_target_with(target: &Polygon, g: &DensityField, n: usize, exec: Exec) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(OtError::param("site count must be at least 1"));
    }
    if n > MAX_GRID_CELLS {
        return Err(OtError::param(format!("site count {n} exceeds the grid limit {MAX_GRID_CELLS}")));
    }
    let Some(bb) = target.bbox() else {
        return Err(OtError::param("target polygon is empty"));
    };
    g.check_positive(target)?;
    let h = (target.area() / n as f64).sqrt();
    let nx = ((bb.width() / h).round() as usize).max(1);
    let ny = ((bb.height() / h).round() as usize).max(1);
    if nx.saturating_mul(ny) > MAX_GRID_CELLS {
        return Err(OtError::param("sampling grid is too large"));
    }
    let (dx, dy) = (bb.width() / nx as f64, bb.height() / ny as f64);
    let rows: Vec<Vec<(Point, f64)>> = exec.map_range(ny, |j| {
        let y0 = bb.min.y + dy * j as f64;
        let y1 = if j + 1 == ny { bb.max.y } else { bb.min.y + dy * (j + 1) as f64 };
        let band = clip_band(target, Point::new(0.0, 1.0), y0, y1);
        let mut row = Vec::new();
        if band.is_empty() {
            return row;
        }
        for i in 0..nx {
            let x0 = bb.min.x + dx * i as f64;
            let x1 = if i + 1 == nx { bb.max.x } else { bb.min.x + dx * (i + 1) as f64 };
            let piece = clip_band(&band, Point::new(1.0, 0.0), x0, x1);
            if piece.is_empty() {
                continue;
            }
            let mass = g.integrate_polygon(&piece);
            if let (Some(c), true) = (piece.centroid(), mass > 0.0) {
                row.push((c, mass));
            }
        }
        row
    });
    let (sites, masses): (Vec<Point>, Vec<f64>) = rows.into_iter().flatten().unzip();
    DiscreteMeasure::new(sites, masses)
}

fn clip_band(p: &Polygon, dir: Point, lo: f64, hi: f64) -> Polygon {
    let upper = HalfPlane { normal: dir, offset: hi };
    let lower = HalfPlane { normal: -dir, offset: -lo };
    p.clip(&upper).clip(&lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use approx::assert_relative_eq;

    #[test]
    fn four_quadrant_sites() {
        let q = build_domain(&DomainSpec::Square { side: 1.0 }).unwrap();
        let m = sample_target(&q, &DensityField::constant(1.0), 4).unwrap();
        assert_eq!(m.len(), 4);
        let mut got: Vec<[f64; 2]> = m.sites.iter().map(|&p| p.into()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]);
        for &mass in &m.masses {
            assert_relative_eq!(mass, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn total_mass_on_square() {
        let q = build_domain(&DomainSpec::Square { side: 1.0 }).unwrap();
        let m = sample_target(&q, &DensityField::constant(1.0), 10_000).unwrap();
        assert_eq!(m.len(), 10_000);
        assert_relative_eq!(m.total_mass(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn total_mass_on_notch_matches_brute_force_quadrature() {
        let y = build_domain(&DomainSpec::NotchedRectangle { eps: 0.2 }).unwrap();
        let m = sample_target(&y, &DensityField::constant(1.0), 5000).unwrap();
        // Independent oracle: midpoint-rule indicator quadrature on a fine grid.
        let (nx, ny) = (2025usize, 2000usize);
        let (hx, hy) = (4.05 / nx as f64, 4.0 / ny as f64);
        let mut count = 0usize;
        for i in 0..nx {
            for j in 0..ny {
                let p = Point::new((i as f64 + 0.5) * hx, -2.0 + (j as f64 + 0.5) * hy);
                if p.x >= 0.2 * (1.0 - p.y.abs()) {
                    count += 1;
                }
            }
        }
        let oracle = count as f64 * hx * hy;
        assert_relative_eq!(oracle, 16.0, max_relative = 1e-4);
        assert_relative_eq!(m.total_mass(), 16.0, max_relative = 1e-6);
        assert!(m.sites.iter().all(|&s| y.contains(s, 1e-12)));
    }

    #[test]
    fn sites_are_symmetric_for_symmetric_targets() {
        let y = build_domain(&DomainSpec::NotchedRectangle { eps: 0.2 }).unwrap();
        let m = sample_target(&y, &DensityField::constant(1.0), 500).unwrap();
        for s in &m.sites {
            let mirror = Point::new(s.x, -s.y);
            assert!(m.sites.iter().any(|t| t.dist(mirror) < 1e-12));
        }
    }

    #[test]
    fn rejects_bad_counts_and_duplicates() {
        let q = build_domain(&DomainSpec::Square { side: 1.0 }).unwrap();
        assert!(sample_target(&q, &DensityField::constant(1.0), 0).is_err());
        assert!(sample_target(&q, &DensityField::constant(1.0), MAX_GRID_CELLS + 1).is_err());
        let p = Point::new(0.5, 0.5);
        assert!(DiscreteMeasure::new(vec![p, p], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![p], vec![-1.0]).is_err());
    }
}
