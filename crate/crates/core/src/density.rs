//! Analytic densities of the form `c0 + c1 * x1 * x2`.
//!
//! This family contains the constants, `1 + a x1 x2` and their rescalings.
//! Every member is a polynomial of degree two, so the triangle rule on edge
//! midpoints integrates it exactly over polygons.

use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};
use crate::geometry::{Point, Polygon};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DensityField {
    Constant { value: f64 },
    /// `1 + a x1 x2`.
    AffineProduct { a: f64 },
    Scaled { factor: f64, inner: Box<DensityField> },
}

impl Default for DensityField {
    fn default() -> Self {
        DensityField::Constant { value: 1.0 }
    }
}

impl DensityField {
    pub fn constant(value: f64) -> Self {
        DensityField::Constant { value }
    }

    pub fn affine_product(a: f64) -> Self {
        DensityField::AffineProduct { a }
    }

    pub fn scaled(self, factor: f64) -> Self {
        DensityField::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    /// `(c0, c1)` with `f(x) = c0 + c1 x1 x2`.
    pub fn coefficients(&self) -> (f64, f64) {
        match self {
            DensityField::Constant { value } => (*value, 0.0),
            DensityField::AffineProduct { a } => (1.0, *a),
            DensityField::Scaled { factor, inner } => {
                let (c0, c1) = inner.coefficients();
                (factor * c0, factor * c1)
            }
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        let (c0, c1) = self.coefficients();
        c0 + c1 * p.x * p.y
    }

    pub fn gradient(&self, p: Point) -> Point {
        let (_, c1) = self.coefficients();
        Point::new(c1 * p.y, c1 * p.x)
    }

    /// Mean of `t -> f(t, x2)` over `[0, s]`, i.e. `(1/s) int_0^s f(t, x2) dt`.
    pub fn mean_along_x1(&self, s: f64, x2: f64) -> f64 {
        let (c0, c1) = self.coefficients();
        c0 + 0.5 * c1 * x2 * s
    }

    /// Mean of `t -> f(y1, t)` over `[0, s]`.
    pub fn mean_along_x2(&self, y1: f64, s: f64) -> f64 {
        let (c0, c1) = self.coefficients();
        c0 + 0.5 * c1 * y1 * s
    }

    /// Exact integral over a polygon (signed fan triangulation).
    pub fn integrate_polygon(&self, poly: &Polygon) -> f64 {
        integrate_fan(poly.vertices(), |p| self.eval(p))
    }

    /// Exact integral along a segment.
    pub fn integrate_segment(&self, a: Point, b: Point) -> f64 {
        let m = (a + b) * 0.5;
        a.dist(b) / 6.0 * (self.eval(a) + 4.0 * self.eval(m) + self.eval(b))
    }

    /// Checks strict positivity on `support` by sampling and returns the
    /// smallest sampled value.
    pub fn check_positive(&self, support: &Polygon) -> Result<f64> {
        let Some(bb) = support.bbox() else {
            return Err(OtError::param("density support is empty"));
        };
        let mut lo = f64::INFINITY;
        for &v in support.vertices() {
            lo = lo.min(self.eval(v));
        }
        const M: usize = 64;
        for i in 0..=M {
            for j in 0..=M {
                let p = Point::new(
                    bb.min.x + bb.width() * i as f64 / M as f64,
                    bb.min.y + bb.height() * j as f64 / M as f64,
                );
                if support.contains(p, 0.0) {
                    lo = lo.min(self.eval(p));
                }
            }
        }
        if lo > 0.0 && lo.is_finite() {
            Ok(lo)
        } else {
            Err(OtError::param(format!("density is not strictly positive on its support (min {lo})")))
        }
    }
}

/// Degree-2 exact integral of `f` over the polygon with the given ring.
pub(crate) fn integrate_fan(ring: &[Point], f: impl Fn(Point) -> f64) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut total = 0.0;
    for k in 1..ring.len() - 1 {
        let (a, b) = (ring[k], ring[k + 1]);
        let area = 0.5 * (a - o).cross(b - o);
        if area == 0.0 {
            continue;
        }
        // Edge-midpoint rule, exact for quadratics.
        let s = f((o + a) * 0.5) + f((a + b) * 0.5) + f((b + o) * 0.5);
        total += area * s / 3.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use approx::assert_relative_eq;

    #[test]
    fn affine_product_integrals_on_the_square() {
        let q = build_domain(&DomainSpec::Square { side: 1.0 }).unwrap();
        // int_Q (1 + a x y) = 1 + a/4
        for a in [0.0, 0.1, 1.0, -0.5] {
            let f = DensityField::affine_product(a);
            assert_relative_eq!(f.integrate_polygon(&q), 1.0 + a / 4.0, epsilon = 1e-15);
        }
        let g = DensityField::constant(1.25);
        assert_relative_eq!(g.integrate_polygon(&q), 1.25, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_matches_monomial_moments_on_a_triangle() {
        // Triangle (0,0), (2,0), (0,3): int x y = 2^2 3^2 / 24 = 1.5.
        let t = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 3.0)]).unwrap();
        let f = DensityField::affine_product(1.0).scaled(2.0);
        assert_relative_eq!(f.integrate_polygon(&t), 2.0 * (3.0 + 1.5), epsilon = 1e-14);
    }

    #[test]
    fn secant_means() {
        let f = DensityField::affine_product(0.6);
        // (1/s) int_0^s (1 + 0.6 t x2) dt at s = 0.5, x2 = 0.4
        assert_relative_eq!(f.mean_along_x1(0.5, 0.4), 1.0 + 0.3 * 0.4 * 0.5);
        assert_relative_eq!(f.mean_along_x2(0.4, 0.5), 1.0 + 0.3 * 0.4 * 0.5);
    }

    #[test]
    fn segment_integral_is_exact() {
        let f = DensityField::affine_product(2.0);
        // along x2 = x1 from 0 to 1: int (1 + 2 t^2) sqrt(2) dt
        let v = f.integrate_segment(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        assert_relative_eq!(v, 2f64.sqrt() * (1.0 + 2.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn positivity_check() {
        let q = build_domain(&DomainSpec::Square { side: 1.0 }).unwrap();
        assert!(DensityField::affine_product(-0.9).check_positive(&q).is_ok());
        assert!(DensityField::affine_product(-1.0).check_positive(&q).is_err());
        assert!(DensityField::constant(0.0).check_positive(&q).is_err());
    }

    #[test]
    fn serde_tags() {
        let f = DensityField::affine_product(1.0).scaled(1.02);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"Scaled\""));
        assert_eq!(serde_json::from_str::<DensityField>(&s).unwrap(), f);
    }
}
