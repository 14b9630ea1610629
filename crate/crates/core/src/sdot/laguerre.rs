use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::density::{integrate_fan, DensityField};
use crate::error::{OtError, Result};
use crate::exec::{ordered_sum, Exec};
use crate::geometry::{LabeledPolygon, Point, Polygon, BOUNDARY_EDGE};

use super::kdtree::{power_half_plane, SiteTree};
use super::measure::duplicate_pair;

/// Points farther than this from the source are rejected by [`LaguerreDiagram::eval_map`].
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Power diagram of weighted sites restricted to a source polygon.
///
/// Cell `i` is `{x in X : |x - y_i|^2 - w_i <= |x - y_j|^2 - w_j for all j}`.
/// The transport map sends every point of cell `i` to `y_i`; it is the
/// gradient of `u(x) = max_i [x . y_i - (|y_i|^2 - w_i) / 2]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaguerreDiagram {
    pub source: Polygon,
    pub density: DensityField,
    pub sites: Vec<Point>,
    pub weights: Vec<f64>,
    pub cells: Vec<Polygon>,
    pub masses: Vec<f64>,
    #[serde(skip)]
    pub(crate) facets: Vec<Vec<Facet>>,
    #[serde(skip)]
    tree: OnceLock<SiteTree>,
}

/// Shared edge between two cells, seen from one side.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Facet {
    pub neighbor: usize,
    /// Integral of the source density over the shared edge.
    pub flux: f64,
}

impl PartialEq for LaguerreDiagram {
    fn eq(&self, o: &Self) -> bool {
        self.source == o.source
            && self.density == o.density
            && self.sites == o.sites
            && self.weights == o.weights
            && self.cells == o.cells
            && self.masses == o.masses
    }
}

pub fn laguerre_diagram(source: &Polygon, density: &DensityField, sites: &[Point], weights: &[f64]) -> Result<LaguerreDiagram> {
    laguerre_diagram_with(source, density, sites, weights, Exec::default())
}

pub fn laguerre_diagram_with(
    source: &Polygon,
    density: &DensityField,
    sites: &[Point],
    weights: &[f64],
    exec: Exec,
) -> Result<LaguerreDiagram> {
    if sites.is_empty() {
        return Err(OtError::param("at least one site is required"));
    }
    if sites.len() != weights.len() {
        return Err(OtError::param("sites and weights differ in length"));
    }
    if source.is_empty() {
        return Err(OtError::param("source polygon is empty"));
    }
    if sites.iter().any(|p| !p.is_finite()) || weights.iter().any(|w| !w.is_finite()) {
        return Err(OtError::param("sites and weights must be finite"));
    }
    if let Some((i, j)) = duplicate_pair(sites) {
        return Err(OtError::param(format!("sites {i} and {j} coincide")));
    }
    Ok(build_unchecked(source, density, sites, weights, exec))
}

pub(crate) fn build_unchecked(
    source: &Polygon,
    density: &DensityField,
    sites: &[Point],
    weights: &[f64],
    exec: Exec,
) -> LaguerreDiagram {
    let tree = SiteTree::new(sites, weights);
    let frame = source_frame(source);
    let raw: Vec<(LabeledPolygon, f64, Vec<Facet>)> = exec.map_range(sites.len(), |i| {
        // Search on the bounding box, whose cells stay small, then cut the
        // source with the half-planes that survived.
        let mut boxed = frame.clone();
        tree.clip_cell(sites, weights, i, &mut boxed);
        let mut active: Vec<usize> = boxed.labels.iter().copied().filter(|&j| j != BOUNDARY_EDGE).collect();
        active.sort_unstable();
        active.dedup();
        let mut cell = LabeledPolygon::from_boundary(source);
        if boxed.is_empty() {
            cell = LabeledPolygon::default();
        }
        for j in active {
            if cell.is_empty() {
                break;
            }
            cell.clip(&power_half_plane(sites, weights, i, j), j);
        }
        let mass = integrate_fan(&cell.pts, |p| density.eval(p));
        let facets = collect_facets(&cell, density);
        (cell, mass, facets)
    });
    let mut cells = Vec::with_capacity(raw.len());
    let mut masses = Vec::with_capacity(raw.len());
    let mut facets = Vec::with_capacity(raw.len());
    for (c, m, f) in raw {
        cells.push(c.to_polygon());
        masses.push(m);
        facets.push(f);
    }
    LaguerreDiagram {
        source: source.clone(),
        density: density.clone(),
        sites: sites.to_vec(),
        weights: weights.to_vec(),
        cells,
        masses,
        facets,
        tree: OnceLock::from(tree),
    }
}

fn source_frame(source: &Polygon) -> LabeledPolygon {
    let b = source.bbox().expect("validated non-empty source");
    let m = 1e-9 * (b.max - b.min).norm().max(1.0);
    let (lo, hi) = (Point::new(b.min.x - m, b.min.y - m), Point::new(b.max.x + m, b.max.y + m));
    LabeledPolygon {
        pts: vec![lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)],
        labels: vec![BOUNDARY_EDGE; 4],
    }
}

fn collect_facets(cell: &LabeledPolygon, density: &DensityField) -> Vec<Facet> {
    let n = cell.pts.len();
    let mut out: Vec<Facet> = Vec::new();
    for k in 0..n {
        let j = cell.labels[k];
        if j == BOUNDARY_EDGE {
            continue;
        }
        let flux = density.integrate_segment(cell.pts[k], cell.pts[(k + 1) % n]);
        match out.iter_mut().find(|f| f.neighbor == j) {
            Some(f) => f.flux += flux,
            None => out.push(Facet { neighbor: j, flux }),
        }
    }
    out
}

impl LaguerreDiagram {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        ordered_sum(self.masses.iter().copied())
    }

    pub fn total_cell_area(&self) -> f64 {
        ordered_sum(self.cells.iter().map(|c| c.signed_area()))
    }

    /// `sqrt(area(X) / N)`.
    pub fn mean_spacing(&self) -> f64 {
        (self.source.area() / self.sites.len() as f64).sqrt()
    }

    /// Index minimizing `|x - y_i|^2 - w_i`, lowest index on ties. No domain check.
    pub fn owner_unchecked(&self, x: Point) -> usize {
        self.tree
            .get_or_init(|| SiteTree::new(&self.sites, &self.weights))
            .owner(&self.sites, &self.weights, x)
    }

    pub fn owner(&self, x: Point) -> Result<usize> {
        if !self.source.contains(x, CONTAINMENT_TOL) {
            return Err(OtError::domain(format!("point ({}, {}) lies outside the source", x.x, x.y)));
        }
        Ok(self.owner_unchecked(x))
    }

    /// Transport map `T(x)`: the site of the cell containing `x`.
    pub fn eval_map(&self, x: Point) -> Result<Point> {
        Ok(self.sites[self.owner(x)?])
    }

    /// Batched [`eval_map`](Self::eval_map).
    pub fn eval_many(&self, xs: &[Point], exec: Exec) -> Result<Vec<Point>> {
        let owners = exec.map_range(xs.len(), |k| self.owner(xs[k]));
        owners.into_iter().map(|o| o.map(|i| self.sites[i])).collect()
    }

    /// Brenier potential `u(x) = max_i [x . y_i - (|y_i|^2 - w_i)/2]`.
    pub fn potential(&self, x: Point) -> f64 {
        self.sites
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| x.dot(*y) - 0.5 * (y.norm2() - w))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of cells with positive area.
    pub fn nonempty_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_empty()).count()
    }

    pub(crate) fn facets(&self) -> &[Vec<Facet>] {
        &self.facets
    }
}
