//! Planar polygons, half-plane clipping and the explicit domain family.
//!
//! Polygons are stored counter-clockwise. Integrals over polygons are
//! computed from signed fan triangulations, so they stay exact even when a
//! clip of a non-convex polygon leaves zero-width bridges between pieces.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};

/// Vertices closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation by a right angle.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Point::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// `{x : x . normal <= offset}` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: Point,
    pub offset: f64,
}

impl HalfPlane {
    /// Half-plane `{x : (x - point) . normal <= 0}`.
    pub fn through(point: Point, normal: Point) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() || !point.is_finite() {
            return Err(OtError::param("half-plane normal must be finite and non-zero"));
        }
        let n = normal * (1.0 / len);
        Ok(HalfPlane {
            normal: n,
            offset: point.dot(n),
        })
    }

    pub fn flipped(self) -> Self {
        HalfPlane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    /// Signed distance, positive outside.
    pub fn depth(&self, p: Point) -> f64 {
        p.dot(self.normal) - self.offset
    }
}

/// Axis-aligned bounding box `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }
}

/// Simple counter-clockwise polygon; no vertices means the empty polygon.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates a vertex list: merges near-duplicates, fixes orientation and
    /// rejects self-intersections.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(OtError::param("polygon vertices must be finite"));
        }
        let mut poly = Polygon::from_raw(vertices);
        if poly.vertices.len() < 3 {
            return Err(OtError::param("a non-empty polygon needs at least 3 distinct vertices"));
        }
        let sa = poly.signed_area();
        if sa == 0.0 {
            return Err(OtError::param("polygon has zero area"));
        }
        if sa < 0.0 {
            poly.vertices.reverse();
        }
        if !poly.is_simple() {
            return Err(OtError::param("polygon is self-intersecting"));
        }
        Ok(poly)
    }

    pub fn empty() -> Self {
        Polygon::default()
    }

    /// Merges coincident vertices; no orientation or simplicity checks.
    pub(crate) fn from_raw(mut vertices: Vec<Point>) -> Self {
        dedup_ring(&mut vertices);
        if vertices.len() < 3 {
            vertices.clear();
        }
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges `(v_k, v_{k+1})`, closing edge included.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid; `None` for the empty polygon.
    pub fn centroid(&self) -> Option<Point> {
        let sa = self.signed_area();
        if self.is_empty() || sa == 0.0 {
            return None;
        }
        let mut c = Point::default();
        for (a, b) in self.edges() {
            c += (a + b) * a.cross(b);
        }
        Some(c * (1.0 / (6.0 * sa)))
    }

    pub fn bbox(&self) -> Option<BBox> {
        let first = *self.vertices.first()?;
        let mut b = BBox {
            min: first,
            max: first,
        };
        for p in &self.vertices {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Closed-set membership with an absolute boundary tolerance.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        if self.winding_number(p) != 0 {
            return true;
        }
        self.boundary_distance(p) <= tol
    }

    fn winding_number(&self, p: Point) -> i32 {
        let mut wn = 0;
        for (a, b) in self.edges() {
            let side = (b - a).cross(p - a);
            if a.y <= p.y {
                if b.y > p.y && side > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && side < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        let v = &self.vertices;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Intersection with a half-plane (Sutherland–Hodgman step).
    pub fn clip(&self, h: &HalfPlane) -> Polygon {
        let n = self.vertices.len();
        if n == 0 {
            return Polygon::empty();
        }
        let depths: Vec<f64> = self.vertices.iter().map(|&p| h.depth(p)).collect();
        if depths.iter().all(|&d| d <= CLIP_EPS) {
            return self.clone();
        }
        if depths.iter().all(|&d| d > CLIP_EPS) {
            return Polygon::empty();
        }
        let mut out = Vec::with_capacity(n + 2);
        for k in 0..n {
            let (p, q) = (self.vertices[k], self.vertices[(k + 1) % n]);
            let (dp, dq) = (depths[k], depths[(k + 1) % n]);
            let p_in = dp <= CLIP_EPS;
            let q_in = dq <= CLIP_EPS;
            if p_in {
                out.push(p);
            }
            if p_in != q_in {
                out.push(crossing(p, q, dp, dq));
            }
        }
        Polygon::from_raw(out)
    }

    pub fn translate(&self, v: Point) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&p| p + v).collect(),
        }
    }

    /// Image under an affine map `x -> m x + t` with `det m > 0`.
    pub fn map_affine(&self, m: [[f64; 2]; 2], t: Point) -> Polygon {
        let f = |p: Point| Point::new(m[0][0] * p.x + m[0][1] * p.y + t.x, m[1][0] * p.x + m[1][1] * p.y + t.y);
        let mut vertices: Vec<Point> = self.vertices.iter().map(|&p| f(p)).collect();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det < 0.0 {
            vertices.reverse();
        }
        Polygon { vertices }
    }
}

/// Points with depth at most this are kept by a clip.
const CLIP_EPS: f64 = 1e-13;

fn crossing(p: Point, q: Point, dp: f64, dq: f64) -> Point {
    let t = dp / (dp - dq);
    p + (q - p) * t
}

fn dedup_ring(v: &mut Vec<Point>) {
    v.dedup_by(|b, a| a.dist(*b) <= MERGE_TOL);
    while v.len() > 1 && v[0].dist(v[v.len() - 1]) <= MERGE_TOL {
        v.pop();
    }
}

pub(crate) fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm2();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Shoelace area; 0 for the empty polygon.
pub fn area(p: &Polygon) -> f64 {
    p.area()
}

/// `P ∩ {x : (x - point) . normal <= 0}`.
pub fn clip_halfplane(p: &Polygon, point: Point, normal: Point) -> Result<Polygon> {
    Ok(p.clip(&HalfPlane::through(point, normal)?))
}

/// Edge tag for cells built by repeated clipping: which constraint produced
/// the edge leaving each vertex.
pub(crate) const BOUNDARY_EDGE: usize = usize::MAX;

/// Polygon whose edges remember the half-plane (or source boundary) they lie on.
#[derive(Clone, Debug, Default)]
pub(crate) struct LabeledPolygon {
    pub pts: Vec<Point>,
    /// `labels[k]` tags the edge `pts[k] -> pts[k + 1]`.
    pub labels: Vec<usize>,
}

impl LabeledPolygon {
    pub fn from_boundary(p: &Polygon) -> Self {
        LabeledPolygon {
            pts: p.vertices().to_vec(),
            labels: vec![BOUNDARY_EDGE; p.len()],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    pub fn clip(&mut self, h: &HalfPlane, label: usize) {
        let n = self.pts.len();
        if n == 0 {
            return;
        }
        let mut any_out = false;
        let mut any_in = false;
        for p in &self.pts {
            if h.depth(*p) <= CLIP_EPS {
                any_in = true;
            } else {
                any_out = true;
            }
        }
        if !any_out {
            return;
        }
        if !any_in {
            self.pts.clear();
            self.labels.clear();
            return;
        }
        let mut pts = Vec::with_capacity(n + 2);
        let mut labels = Vec::with_capacity(n + 2);
        for k in 0..n {
            let (p, q) = (self.pts[k], self.pts[(k + 1) % n]);
            let (dp, dq) = (h.depth(p), h.depth(q));
            let p_in = dp <= CLIP_EPS;
            let q_in = dq <= CLIP_EPS;
            match (p_in, q_in) {
                (true, true) => {
                    pts.push(p);
                    labels.push(self.labels[k]);
                }
                (true, false) => {
                    pts.push(p);
                    labels.push(self.labels[k]);
                    pts.push(crossing(p, q, dp, dq));
                    labels.push(label);
                }
                (false, true) => {
                    pts.push(crossing(p, q, dp, dq));
                    labels.push(self.labels[k]);
                }
                (false, false) => {}
            }
        }
        // Drop zero-length edges; the surviving vertex keeps the label of the
        // edge that actually leaves it.
        let mut k = 0;
        while pts.len() > 1 && k < pts.len() {
            let next = (k + 1) % pts.len();
            if pts[k].dist(pts[next]) <= MERGE_TOL {
                pts.remove(k);
                labels.remove(k);
            } else {
                k += 1;
            }
        }
        if pts.len() < 3 {
            pts.clear();
            labels.clear();
        }
        self.pts = pts;
        self.labels = labels;
    }


    pub fn to_polygon(&self) -> Polygon {
        Polygon::from_raw(self.pts.clone())
    }
}

/// Parametrized domain family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum DomainSpec {
    Square {
        side: f64,
    },
    Rectangle {
        x_range: [f64; 2],
        y_range: [f64; 2],
    },
    /// `(0, 4 + eps/4) x (-2, 2)` minus the triangle `(eps,0), (0,1), (0,-1)`.
    NotchedRectangle {
        eps: f64,
    },
    /// Two half-discs of radius `sqrt(1 - 4 eps / pi)` centred at `±e1`,
    /// joined by the bar `[-1,1] x (-eps, eps)`; same area as the unit disc.
    Dumbbell {
        eps: f64,
        arc_vertices: usize,
    },
    Disc {
        radius: f64,
        arc_vertices: usize,
    },
    /// Notched rectangle whose three notch corners are rounded by
    /// `C^{1,alpha}` caps inside the smoothing radius.
    SmoothedNotch {
        eps: f64,
        alpha: f64,
        smoothing_radius: f64,
    },
}

pub const MIN_ARC_VERTICES: usize = 16;
const CAP_POINTS: usize = 17;

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(OtError::param(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let arcs = |n: usize| {
            if n >= MIN_ARC_VERTICES {
                Ok(())
            } else {
                Err(OtError::param(format!("arc vertex count must be >= {MIN_ARC_VERTICES}, got {n}")))
            }
        };
        match *self {
            DomainSpec::Square { side } => positive("side", side),
            DomainSpec::Rectangle { x_range, y_range } => {
                if x_range[0] < x_range[1] && y_range[0] < y_range[1] {
                    Ok(())
                } else {
                    Err(OtError::param("rectangle ranges must be increasing"))
                }
            }
            DomainSpec::NotchedRectangle { eps } => {
                positive("eps", eps)?;
                if eps >= 4.0 {
                    return Err(OtError::param("notch depth eps must be < 4"));
                }
                Ok(())
            }
            DomainSpec::Dumbbell { eps, arc_vertices } => {
                positive("eps", eps)?;
                arcs(arc_vertices)?;
                let r2 = 1.0 - 4.0 * eps / PI;
                if r2 <= eps * eps {
                    return Err(OtError::param(format!("dumbbell eps = {eps} leaves no room for the lobes")));
                }
                Ok(())
            }
            DomainSpec::Disc { radius, arc_vertices } => {
                positive("radius", radius)?;
                arcs(arc_vertices)
            }
            DomainSpec::SmoothedNotch {
                eps,
                alpha,
                smoothing_radius,
            } => {
                positive("eps", eps)?;
                if eps >= 4.0 {
                    return Err(OtError::param("notch depth eps must be < 4"));
                }
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(OtError::param(format!("alpha must lie in (0,1), got {alpha}")));
                }
                if !(smoothing_radius > 0.0 && smoothing_radius < eps / 2.0) {
                    return Err(OtError::param(format!(
                        "smoothing radius must lie in (0, eps/2), got {smoothing_radius}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Lobe radius of the dumbbell, chosen so its area equals that of the unit disc.
pub fn dumbbell_radius(eps: f64) -> f64 {
    (1.0 - 4.0 * eps / PI).sqrt()
}

pub fn build_domain(spec: &DomainSpec) -> Result<Polygon> {
    spec.validate()?;
    let v = match *spec {
        DomainSpec::Square { side } => vec![
            Point::new(0.0, 0.0),
            Point::new(side, 0.0),
            Point::new(side, side),
            Point::new(0.0, side),
        ],
        DomainSpec::Rectangle { x_range, y_range } => vec![
            Point::new(x_range[0], y_range[0]),
            Point::new(x_range[1], y_range[0]),
            Point::new(x_range[1], y_range[1]),
            Point::new(x_range[0], y_range[1]),
        ],
        DomainSpec::NotchedRectangle { eps } => notch_vertices(eps),
        DomainSpec::Dumbbell { eps, arc_vertices } => {
            let r = dumbbell_radius(eps);
            let mut v = Vec::with_capacity(2 * arc_vertices + 4);
            for k in 0..arc_vertices {
                let t = -PI / 2.0 + PI * k as f64 / (arc_vertices - 1) as f64;
                v.push(Point::new(1.0 + r * t.cos(), r * t.sin()));
            }
            v.push(Point::new(1.0, eps));
            v.push(Point::new(-1.0, eps));
            for k in 0..arc_vertices {
                let t = PI / 2.0 + PI * k as f64 / (arc_vertices - 1) as f64;
                v.push(Point::new(-1.0 + r * t.cos(), r * t.sin()));
            }
            v.push(Point::new(-1.0, -eps));
            v.push(Point::new(1.0, -eps));
            v
        }
        DomainSpec::Disc { radius, arc_vertices } => (0..arc_vertices)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / arc_vertices as f64;
                Point::new(radius * t.cos(), radius * t.sin())
            })
            .collect(),
        DomainSpec::SmoothedNotch {
            eps,
            alpha,
            smoothing_radius,
        } => {
            let base = notch_vertices(eps);
            let n = base.len();
            let mut v = Vec::with_capacity(n + 3 * CAP_POINTS);
            // Vertices 4, 5, 6 are (0,1), (eps,0), (0,-1).
            for k in 0..n {
                if (4..=6).contains(&k) {
                    let prev = base[(k + n - 1) % n];
                    let next = base[(k + 1) % n];
                    v.extend(corner_cap(prev, base[k], next, alpha, smoothing_radius));
                } else {
                    v.push(base[k]);
                }
            }
            v
        }
    };
    Polygon::new(v)
}

fn notch_vertices(eps: f64) -> Vec<Point> {
    let right = 4.0 + eps / 4.0;
    vec![
        Point::new(0.0, -2.0),
        Point::new(right, -2.0),
        Point::new(right, 2.0),
        Point::new(0.0, 2.0),
        Point::new(0.0, 1.0),
        Point::new(eps, 0.0),
        Point::new(0.0, -1.0),
    ]
}

/// Replaces the corner at `c` by the graph of `s = k0 |t|^{1+alpha} + d`
/// in corner-local coordinates, matching value and slope of the two edges
/// at distance `radius` from the corner.
fn corner_cap(prev: Point, c: Point, next: Point, alpha: f64, radius: f64) -> Vec<Point> {
    let a = (prev - c) * (1.0 / prev.dist(c));
    let b = (next - c) * (1.0 / next.dist(c));
    let axis = {
        let s = a + b;
        s * (1.0 / s.norm())
    };
    let side = {
        let s = b - a;
        s * (1.0 / s.norm())
    };
    // Edges are s = k |t| with k = cot(half opening angle).
    let half = 0.5 * a.dot(b).clamp(-1.0, 1.0).acos();
    let k = half.cos() / half.sin();
    let t0 = radius / (1.0 + k * k).sqrt();
    let c0 = k / ((1.0 + alpha) * t0.powf(alpha));
    let d = k * t0 * alpha / (1.0 + alpha);
    (0..CAP_POINTS)
        .map(|m| {
            let t = -t0 + 2.0 * t0 * m as f64 / (CAP_POINTS - 1) as f64;
            let s = c0 * t.abs().powf(1.0 + alpha) + d;
            c + side * t + axis * s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_square() -> Polygon {
        build_domain(&DomainSpec::Square { side: 1.0 }).unwrap()
    }

    #[test]
    fn square_vertices_and_area() {
        let q = unit_square();
        assert_eq!(
            q.vertices(),
            &[
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0)
            ]
        );
        assert_eq!(area(&q), 1.0);
    }

    #[test]
    fn notch_has_the_rectangle_area() {
        let y = build_domain(&DomainSpec::NotchedRectangle { eps: 0.2 }).unwrap();
        assert_eq!(y.len(), 7);
        for p in [Point::new(0.2, 0.0), Point::new(0.0, 1.0), Point::new(0.0, -1.0)] {
            assert!(y.vertices().contains(&p));
        }
        assert_relative_eq!(area(&y), 16.0, max_relative = 1e-15);
        for eps in [0.01, 0.1, 0.5, 0.99] {
            let y = build_domain(&DomainSpec::NotchedRectangle { eps }).unwrap();
            assert_relative_eq!(area(&y), 16.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn dumbbell_radius_closed_form() {
        assert_relative_eq!(dumbbell_radius(0.1), 0.934171, epsilon = 1e-6);
    }

    #[test]
    fn dumbbell_area_converges_to_pi() {
        let mut last_err = f64::INFINITY;
        for arcs in [16, 32, 64, 128, 256] {
            let d = build_domain(&DomainSpec::Dumbbell { eps: 0.1, arc_vertices: arcs }).unwrap();
            let err = PI - area(&d);
            assert!(err > 0.0, "inscribed polygon must underestimate");
            assert!(err < last_err);
            last_err = err;
        }
        assert!(last_err < 2e-3, "error {last_err}");
    }

    #[test]
    fn clip_examples() {
        let q = unit_square();
        let left = clip_halfplane(&q, Point::new(0.5, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(area(&left), 0.5);
        let tri = clip_halfplane(&q, Point::new(1.0, 0.0), Point::new(1.0, 1.0)).unwrap();
        assert_eq!(tri.len(), 3);
        assert_relative_eq!(area(&tri), 0.5);
        let none = clip_halfplane(&q, Point::new(-1.0, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert!(none.is_empty());
        assert_eq!(area(&none), 0.0);
    }

    #[test]
    fn zero_normal_is_rejected() {
        let q = unit_square();
        assert!(matches!(
            clip_halfplane(&q, Point::new(0.5, 0.5), Point::new(0.0, 0.0)),
            Err(OtError::Parameter(_))
        ));
    }

    #[test]
    fn orientation_is_corrected() {
        let cw = vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let p = Polygon::new(cw).unwrap();
        assert!(p.signed_area() > 0.0);
    }

    #[test]
    fn bow_tie_is_rejected() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(Polygon::new(v).is_err());
    }

    #[test]
    fn parameter_ranges() {
        assert!(build_domain(&DomainSpec::Dumbbell { eps: 0.1, arc_vertices: 8 }).is_err());
        assert!(build_domain(&DomainSpec::NotchedRectangle { eps: -0.1 }).is_err());
        assert!(build_domain(&DomainSpec::SmoothedNotch {
            eps: 0.1,
            alpha: 0.5,
            smoothing_radius: 0.06
        })
        .is_err());
        assert!(build_domain(&DomainSpec::SmoothedNotch {
            eps: 0.1,
            alpha: 1.5,
            smoothing_radius: 0.02
        })
        .is_err());
    }

    #[test]
    fn smoothed_notch_is_close_to_the_notch() {
        let eps = 0.1;
        let rho = 0.02;
        let s = build_domain(&DomainSpec::SmoothedNotch {
            eps,
            alpha: 0.5,
            smoothing_radius: rho,
        })
        .unwrap();
        let n = build_domain(&DomainSpec::NotchedRectangle { eps }).unwrap();
        assert!(s.is_simple());
        // Each cap changes the area by at most the area of a disc of radius rho.
        assert!((area(&s) - area(&n)).abs() < 3.0 * PI * rho * rho);
        for p in s.vertices() {
            assert!(n.boundary_distance(*p) <= rho);
        }
        // The cap at the reflex tip fills in part of the notch.
        let tip = Point::new(eps, 0.0);
        assert!(s.contains(tip, 0.0) && s.boundary_distance(tip) > 0.0);
        assert!(!n.contains(tip - Point::new(1e-4, 0.0), 0.0));
        assert!(s.contains(tip - Point::new(1e-4, 0.0), 0.0));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let d = build_domain(&DomainSpec::Dumbbell { eps: 0.05, arc_vertices: 64 }).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.starts_with("{\"vertices\":[["));
        let back: Polygon = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let spec = DomainSpec::SmoothedNotch {
            eps: 0.01,
            alpha: 0.5,
            smoothing_radius: 0.0025,
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"variant\":\"SmoothedNotch\""));
        assert_eq!(serde_json::from_str::<DomainSpec>(&s).unwrap(), spec);
    }

    fn convex_sample() -> impl Strategy<Value = Polygon> {
        prop_oneof![
            Just(unit_square()),
            Just(build_domain(&DomainSpec::Disc { radius: 1.0, arc_vertices: 32 }).unwrap()),
            Just(build_domain(&DomainSpec::NotchedRectangle { eps: 0.3 }).unwrap()),
            Just(build_domain(&DomainSpec::Dumbbell { eps: 0.1, arc_vertices: 32 }).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn complementary_clips_partition_area(
            poly in convex_sample(),
            px in -2.0f64..2.0, py in -2.0f64..2.0, ang in 0.0f64..(2.0 * PI),
        ) {
            let p = Point::new(px, py);
            let n = Point::new(ang.cos(), ang.sin());
            let a = clip_halfplane(&poly, p, n).unwrap();
            let b = clip_halfplane(&poly, p, -n).unwrap();
            let total = area(&poly);
            prop_assert!((a.signed_area() + b.signed_area() - total).abs() <= 1e-12 * total);
            prop_assert!(area(&a) <= total * (1.0 + 1e-12));
        }

        #[test]
        fn clipping_is_idempotent(
            poly in convex_sample(),
            px in -2.0f64..2.0, py in -2.0f64..2.0, ang in 0.0f64..(2.0 * PI),
        ) {
            let p = Point::new(px, py);
            let n = Point::new(ang.cos(), ang.sin());
            let once = clip_halfplane(&poly, p, n).unwrap();
            let twice = clip_halfplane(&once, p, n).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for (u, v) in once.vertices().iter().zip(twice.vertices()) {
                prop_assert!(u.dist(*v) <= 1e-12);
            }
        }
    }
}
