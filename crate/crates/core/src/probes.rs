//! Numerical (dis)continuity probes on solved transport maps.
//!
//! All probes only read a [`LaguerreDiagram`]. Random sampling goes through
//! a seeded ChaCha8 stream so reports are reproducible.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};
use crate::exec::{ordered_sum, Exec};
use crate::geometry::{segment_distance, Point};
use crate::sdot::LaguerreDiagram;

/// Default jump threshold in units of the mean site spacing.
pub const JUMP_THRESHOLD_SPACINGS: f64 = 10.0;
/// Default probe offset in units of the mean site spacing.
pub const PROBE_OFFSET_SPACINGS: f64 = 2.0;
/// Default tube width in units of the mean site spacing.
pub const TUBE_WIDTH_SPACINGS: f64 = 2.0;

/// Samples `(x, T(x))` of a transport map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSamples {
    pub pairs: Vec<(Point, Point)>,
    /// Mean site spacing of the diagram the samples came from.
    pub spacing: f64,
    /// Diameter of the source domain.
    pub diameter: f64,
    pub seed: u64,
}

impl TransportSamples {
    /// `n` points drawn uniformly from the source by rejection in its
    /// bounding box, mapped through `d`.
    pub fn from_diagram(d: &LaguerreDiagram, n: usize, seed: u64, exec: Exec) -> Result<Self> {
        if n == 0 {
            return Err(OtError::param("sample count must be positive"));
        }
        let xs = uniform_points(d, n, seed)?;
        let ys = d.eval_many(&xs, exec)?;
        Ok(TransportSamples {
            pairs: xs.into_iter().zip(ys).collect(),
            spacing: d.mean_spacing(),
            diameter: d.source.diameter(),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Rows `x1,x2,t1,t2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,x2,t1,t2\n");
        for (x, t) in &self.pairs {
            push_row(&mut out, &[x.x, x.y, t.x, t.y]);
        }
        out
    }
}

/// `n` uniform points in the source of `d`.
pub fn uniform_points(d: &LaguerreDiagram, n: usize, seed: u64) -> Result<Vec<Point>> {
    let bb = d
        .source
        .bbox()
        .ok_or_else(|| OtError::param("source polygon is empty"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 1000 {
            return Err(OtError::diagnostic("rejection sampling of the source failed"));
        }
        let p = Point::new(
            bb.min.x + bb.width() * rng.gen::<f64>(),
            bb.min.y + bb.height() * rng.gen::<f64>(),
        );
        if d.source.contains(p, 0.0) {
            out.push(p);
        }
    }
    Ok(out)
}

/// `J(s) = |T(x(s) + delta n) - T(x(s) - delta n)|` along a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpProfile {
    /// Arc length from the segment start.
    pub s: Vec<f64>,
    pub jumps: Vec<f64>,
    pub delta: f64,
    /// Images of the `+delta` probe points.
    pub plus: Vec<Point>,
    /// Images of the `-delta` probe points.
    pub minus: Vec<Point>,
    /// Parameters whose probe pair left the source.
    pub skipped: Vec<f64>,
}

impl JumpProfile {
    pub fn max_jump(&self) -> f64 {
        self.jumps.iter().copied().fold(0.0, f64::max)
    }

    /// Rows `s,jump,plus1,plus2,minus1,minus2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,jump,plus1,plus2,minus1,minus2\n");
        for k in 0..self.s.len() {
            let (p, m) = (self.plus[k], self.minus[k]);
            push_row(&mut out, &[self.s[k], self.jumps[k], p.x, p.y, m.x, m.y]);
        }
        out
    }
}

/// Jump profile across the segment `a -> b`; `+delta` lies to the left of
/// the direction of travel.
pub fn displacement_jump(d: &LaguerreDiagram, a: Point, b: Point, delta: f64, n_samples: usize) -> Result<JumpProfile> {
    displacement_jump_with(d, a, b, delta, n_samples, Exec::default())
}

pub fn displacement_jump_with(
    d: &LaguerreDiagram,
    a: Point,
    b: Point,
    delta: f64,
    n_samples: usize,
    exec: Exec,
) -> Result<JumpProfile> {
    if !(delta > 0.0) || n_samples < 2 {
        return Err(OtError::param("need delta > 0 and at least two samples"));
    }
    let len = a.dist(b);
    if !(len > 0.0) {
        return Err(OtError::param("probe segment is degenerate"));
    }
    let dir = (b - a) * (1.0 / len);
    let normal = dir.perp();
    let probes = exec.map_range(n_samples, |k| {
        let s = len * k as f64 / (n_samples - 1) as f64;
        let x = a + dir * s;
        let hi = d.eval_map(x + normal * delta);
        let lo = d.eval_map(x - normal * delta);
        (s, hi, lo)
    });
    let mut out = JumpProfile {
        s: Vec::new(),
        jumps: Vec::new(),
        delta,
        plus: Vec::new(),
        minus: Vec::new(),
        skipped: Vec::new(),
    };
    for (s, hi, lo) in probes {
        match (hi, lo) {
            (Ok(p), Ok(m)) => {
                out.s.push(s);
                out.jumps.push(p.dist(m));
                out.plus.push(p);
                out.minus.push(m);
            }
            _ => out.skipped.push(s),
        }
    }
    if out.s.is_empty() {
        return Err(OtError::diagnostic("every probe pair left the source"));
    }
    Ok(out)
}

/// Lebesgue measure of `du` over the closed tube of half-width `width`
/// around the segment `a -> b`.
///
/// The potential of a Laguerre diagram is piecewise affine; its
/// subdifferential is a point inside a cell, a segment on a cell edge, and
/// the convex hull of the incident sites at a vertex. Only vertices carry
/// area, so the measure is the sum of those hull areas over the interior
/// vertices in the tube. Vertices shared by more than three cells are
/// merged before the hulls are formed.
pub fn subdiff_measure(d: &LaguerreDiagram, a: Point, b: Point, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(OtError::param("tube width must be positive"));
    }
    let scale = d.source.diameter().max(1.0);
    let tol = 1e-9 * scale;
    let mut clusters: Vec<(Point, Vec<usize>)> = Vec::new();
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Point| ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64);
    for (i, cell) in d.cells.iter().enumerate() {
        for &v in cell.vertices() {
            if segment_distance(v, a, b) > width + tol {
                continue;
            }
            let (kx, ky) = key(v);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(ids) = buckets.get(&(kx + dx, ky + dy)) {
                        for &c in ids {
                            if clusters[c].0.dist(v) <= tol {
                                found = Some(c);
                                break 'search;
                            }
                        }
                    }
                }
            }
            match found {
                Some(c) => {
                    if !clusters[c].1.contains(&i) {
                        clusters[c].1.push(i);
                    }
                }
                None => {
                    buckets.entry((kx, ky)).or_default().push(clusters.len());
                    clusters.push((v, vec![i]));
                }
            }
        }
    }
    let areas = clusters.iter().filter_map(|(v, cells)| {
        if cells.len() < 3 || segment_distance(*v, a, b) > width || d.source.boundary_distance(*v) <= tol {
            return None;
        }
        let pts: Vec<Point> = cells.iter().map(|&i| d.sites[i]).collect();
        Some(convex_hull_area(&pts))
    });
    Ok(ordered_sum(areas))
}

/// Area of the convex hull (monotone chain).
pub(crate) fn convex_hull_area(points: &[Point]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && (hull[hull.len() - 1] - hull[hull.len() - 2]).cross(q - hull[hull.len() - 2]) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    0.5 * (0..n).map(|k| hull[k].cross(hull[(k + 1) % n])).sum::<f64>().abs()
}

/// Split-point estimate for the notched problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEstimate {
    /// Largest `s` with `J(s)` above the threshold; 0 when `no_split`.
    pub t_hat: f64,
    pub no_split: bool,
    /// Same scan using only the upper probe images (`2 |T(s, +delta)_2|`).
    pub t_plus: f64,
    /// Same scan using only the lower probe images.
    pub t_minus: f64,
    pub threshold: f64,
    pub spacing: f64,
    pub profile: JumpProfile,
}

/// Scans `(s, +-delta)` for `s` from 2 down to 0 and reports the last
/// parameter at which the pair is torn apart.
///
/// The data are symmetric under `x2 -> -x2`, so the tear lies on the axis
/// and the one-sided jumps `2 |T(s, +-delta)_2|` give two independent
/// estimates of the same split point.
pub fn estimate_split_point(d: &LaguerreDiagram, delta: f64, resolution: usize, threshold: f64) -> Result<SplitEstimate> {
    if !(threshold > 0.0) {
        return Err(OtError::param("jump threshold must be positive"));
    }
    let profile = displacement_jump(d, Point::new(0.0, 0.0), Point::new(2.0, 0.0), delta, resolution)?;
    let last = |vals: &mut dyn Iterator<Item = (f64, f64)>| -> f64 {
        vals.filter(|&(_, j)| j > threshold).map(|(s, _)| s).fold(0.0, f64::max)
    };
    let t_hat = last(&mut profile.s.iter().copied().zip(profile.jumps.iter().copied()));
    let t_plus = last(&mut profile.s.iter().copied().zip(profile.plus.iter().map(|p| 2.0 * p.y.abs())));
    let t_minus = last(&mut profile.s.iter().copied().zip(profile.minus.iter().map(|p| 2.0 * p.y.abs())));
    let no_split = !profile.jumps.iter().any(|&j| j > threshold);
    Ok(SplitEstimate {
        t_hat,
        no_split,
        t_plus,
        t_minus,
        threshold,
        spacing: d.mean_spacing(),
        profile,
    })
}

/// Least-squares fit `log |T(x) - T(x')| ~ log C + beta log |x - x'|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub log_constant: f64,
    pub window: [f64; 2],
    /// `(log |x - x'|, log |T(x) - T(x')|)` of every pair used.
    pub points: Vec<(f64, f64)>,
    /// In-window pairs dropped because both points share a cell.
    pub same_image_pairs: usize,
}

impl HolderFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("log_dx,log_dt\n");
        for &(a, b) in &self.points {
            push_row(&mut out, &[a, b]);
        }
        out
    }
}

/// Hölder fit over all sample pairs with `|x - x'|` in `[4 spacing, diam / 4]`.
pub fn holder_fit(samples: &TransportSamples) -> Result<HolderFit> {
    holder_fit_filtered(samples, |_, _| true)
}

/// [`holder_fit`] restricted to pairs accepted by `keep`.
pub fn holder_fit_filtered(samples: &TransportSamples, keep: impl Fn(Point, Point) -> bool) -> Result<HolderFit> {
    if samples.len() < 100 {
        return Err(OtError::param("a Hölder fit needs at least 100 samples"));
    }
    let window = [4.0 * samples.spacing, samples.diameter / 4.0];
    if !(window[0] < window[1]) {
        return Err(OtError::param("pair-distance window is empty; refine the diagram"));
    }
    let mut points = Vec::new();
    let mut same = 0usize;
    let p = &samples.pairs;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let dx = p[i].0.dist(p[j].0);
            if dx < window[0] || dx > window[1] || !keep(p[i].0, p[j].0) {
                continue;
            }
            let dt = p[i].1.dist(p[j].1);
            if dt == 0.0 {
                same += 1;
                continue;
            }
            points.push((dx.ln(), dt.ln()));
        }
    }
    if points.len() < 2 {
        return Err(OtError::diagnostic("degenerate samples: no pair with distinct images in the window"));
    }
    let (slope, intercept) = least_squares_fit(&points)
        .ok_or_else(|| OtError::diagnostic("degenerate samples: pair distances do not vary"))?;
    Ok(HolderFit {
        exponent: slope,
        log_constant: intercept,
        window,
        points,
        same_image_pairs: same,
    })
}

/// Slope and intercept of the ordinary least-squares line.
pub(crate) fn least_squares_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = ordered_sum(points.iter().map(|p| p.0)) / n;
    let my = ordered_sum(points.iter().map(|p| p.1)) / n;
    let sxx = ordered_sum(points.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let sxy = ordered_sum(points.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Edge and corner deviations of a rectangle-to-rectangle map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    /// Max distance from `T(x)` to the edge containing `x`, for the bottom,
    /// top, left and right edges.
    pub edge_distance: [f64; 4],
    /// `|T(c) - c|` for the corners in the order (min,min), (max,min),
    /// (max,max), (min,max).
    pub corner_displacement: [f64; 4],
}

impl BoundaryReport {
    pub fn max_edge_distance(&self) -> f64 {
        self.edge_distance.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_corner_displacement(&self) -> f64 {
        self.corner_displacement.iter().copied().fold(0.0, f64::max)
    }
}

/// Samples `n` points per edge of the source bounding box, corners included.
pub fn boundary_preservation(d: &LaguerreDiagram, n: usize) -> BoundaryReport {
    let Some(bb) = d.source.bbox() else {
        return BoundaryReport {
            edge_distance: [0.0; 4],
            corner_displacement: [0.0; 4],
        };
    };
    boundary_report(bb.min, bb.max, n.max(2), |x| d.sites[d.owner_unchecked(x)])
}

/// [`BoundaryReport`] of an arbitrary map of the box `[lo, hi]`, sampled at
/// `n` points per edge.
pub fn boundary_report(lo: Point, hi: Point, n: usize, map: impl Fn(Point) -> Point) -> BoundaryReport {
    let lerp = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / (n - 1) as f64;
    let mut edge = [0.0f64; 4];
    for k in 0..n {
        let (sx, sy) = (lerp(lo.x, hi.x, k), lerp(lo.y, hi.y, k));
        edge[0] = edge[0].max((map(Point::new(sx, lo.y)).y - lo.y).abs());
        edge[1] = edge[1].max((map(Point::new(sx, hi.y)).y - hi.y).abs());
        edge[2] = edge[2].max((map(Point::new(lo.x, sy)).x - lo.x).abs());
        edge[3] = edge[3].max((map(Point::new(hi.x, sy)).x - hi.x).abs());
    }
    let corners = [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)];
    BoundaryReport {
        edge_distance: edge,
        corner_displacement: corners.map(|c| map(c).dist(c)),
    }
}

/// Formats `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Appends one comma-separated LF-terminated row.
pub fn push_row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}
