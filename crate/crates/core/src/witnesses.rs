//! Closed-form witnesses: the harmonic upper barrier near the notch tip and
//! the approximating cubic polynomials at a corner of the square.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};
use crate::plt::ScalarGrid;
use crate::probes::{least_squares_fit, push_row};

/// `Re(z log z) = p ln|z| - x2 arg z` with `z = p + i x2`, principal branch.
///
/// Only the closed right half-plane is used, so the branch cut on the
/// negative real axis is never reached. The value at `z = 0` is the limit 0.
fn re_z_log_z(p: f64, x2: f64) -> f64 {
    if p == 0.0 && x2 == 0.0 {
        return 0.0;
    }
    p * p.hypot(x2).ln() - x2 * x2.atan2(p)
}

fn check_half_plane(eps: f64, p: f64, x2: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(OtError::param("barrier needs eps > 0"));
    }
    if !(p >= 0.0) || !x2.is_finite() || !p.is_finite() {
        return Err(OtError::domain(format!("barrier is defined for p >= 0, got ({p}, {x2})")));
    }
    Ok(())
}

/// `b(p, x2) = (2 eps / pi) Re(z log z) + eps + 2 (x2^2 - p^2) + 16 p`.
pub fn barrier_eval(eps: f64, p: f64, x2: f64) -> Result<f64> {
    Ok(eps + barrier_increment(eps, p, x2)?)
}

/// `b(p, x2) - b(0, 0)`, without the cancellation of adding and removing `eps`.
pub fn barrier_increment(eps: f64, p: f64, x2: f64) -> Result<f64> {
    check_half_plane(eps, p, x2)?;
    Ok(2.0 * eps / std::f64::consts::PI * re_z_log_z(p, x2) + 2.0 * (x2 * x2 - p * p) + 16.0 * p)
}

/// Five-point Laplacian of the barrier with step `h`.
pub fn barrier_laplacian(eps: f64, p: f64, x2: f64, h: f64) -> Result<f64> {
    let b = |a: f64, c: f64| barrier_increment(eps, a, c);
    Ok((b(p + h, x2)? + b(p - h, x2)? + b(p, x2 + h)? + b(p, x2 - h)? - 4.0 * b(p, x2)?) / (h * h))
}

/// Largest `|barrier_laplacian|` over `points` seeded random points of
/// `(0.05, 2) x (-2, 2)` at distance at least 1/4 from the origin, step `1e-3`.
pub fn barrier_harmonicity(eps: f64, points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < points {
        let (p, x2): (f64, f64) = (rng.gen_range(0.05..2.0), rng.gen_range(-2.0..2.0));
        if p.hypot(x2) < 0.25 {
            continue;
        }
        checked += 1;
        worst = worst.max(barrier_laplacian(eps, p, x2, 1e-3)?.abs());
    }
    Ok(worst)
}

/// Positive root of `(2 eps / pi) ln p + 16 - 2 p = 0` below 8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignThreshold {
    pub eps: f64,
    /// Underflows to 0 for `eps` below about 0.035; `ln_p_star` stays exact.
    pub p_star: f64,
    pub ln_p_star: f64,
}

/// `b(p, 0) - b(0, 0) = p [(2 eps / pi) ln p + 16 - 2 p]` is negative for
/// `0 < p < p*`. Bisection on `ln p` to relative accuracy `1e-3` in `p`.
pub fn barrier_sign_threshold(eps: f64) -> Result<SignThreshold> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OtError::param(format!("eps must lie in (0, 1), got {eps}")));
    }
    let k = 2.0 * eps / std::f64::consts::PI;
    let h = |t: f64| k * t + 16.0 - 2.0 * t.exp();
    // h(lo) < 0 since 16 - 2p < 16 and k lo < -16; h(ln 8) > 0.
    let mut lo = -16.0 / k - 1.0;
    let mut hi = 8f64.ln();
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(SignThreshold {
        eps,
        p_star: t.exp(),
        ln_p_star: t,
    })
}

/// `P(x) = p0 + p21 x1^2 + p22 x2^2 + p31 x1^3 + p32 x2^3`.
///
/// The form has no linear, mixed-quadratic or mixed-cubic terms, so
/// `d1 P(0, .) = d2 P(., 0) = 0` holds by construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolyApprox {
    pub p0: f64,
    pub p21: f64,
    pub p22: f64,
    pub p31: f64,
    pub p32: f64,
    /// Set when the linearized-operator constraints hold.
    pub approximating: bool,
}

impl PolyApprox {
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.p0 + self.p21 * x1 * x1 + self.p22 * x2 * x2 + self.p31 * x1 * x1 * x1 + self.p32 * x2 * x2 * x2
    }

    /// Largest absolute coefficient.
    pub fn norm(&self) -> f64 {
        [self.p0, self.p21, self.p22, self.p31, self.p32]
            .iter()
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `[d0, d11, d12]`: the constant and linear coefficients of
    /// `a1 d11 P + a2 d22 P` with `a` linearized at the origin.
    pub fn constraint_residuals(&self, a: &LinearizedCoefficients) -> [f64; 3] {
        let [a1, a2] = a.value;
        let [g1, g2] = a.gradient;
        [
            2.0 * a1 * self.p21 + 2.0 * a2 * self.p22,
            6.0 * a1 * self.p31 + 2.0 * self.p21 * g1[0] + 2.0 * self.p22 * g2[0],
            6.0 * a2 * self.p32 + 2.0 * self.p21 * g1[1] + 2.0 * self.p22 * g2[1],
        ]
    }
}

/// Coefficients `a1, a2` of `a1 d11 v + a2 d22 v = 0` and their gradients at 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedCoefficients {
    pub value: [f64; 2],
    pub gradient: [[f64; 2]; 2],
}

impl LinearizedCoefficients {
    pub fn constant(a1: f64, a2: f64) -> Self {
        LinearizedCoefficients {
            value: [a1, a2],
            gradient: [[0.0; 2]; 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub poly: PolyApprox,
    /// `max |v - P|` over the grid nodes of `[0, r]^2`.
    pub residual: f64,
    /// Largest node coordinate not exceeding the requested radius.
    pub radius: f64,
    pub nodes_per_side: usize,
}

/// Smallest node count per side of `[0, r]^2` accepted by [`fit_approx_poly`].
pub const MIN_FIT_NODES: usize = 8;

/// Approximating polynomial with the given (or default) `p21` closest to
/// `v` in the sup norm over the nodes of `[0, r]^2`.
///
/// The constraints fix `p22`, `p31` and `p32` once `p21` is chosen, so only
/// `p0` is free; the sup-norm optimum is the midrange of `v - (P - p0)`.
/// The default `p21` is half the one-sided second difference of `v` at 0.
pub fn fit_approx_poly(v: &ScalarGrid, a: &LinearizedCoefficients, r: f64, p21: Option<f64>) -> Result<PolyFit> {
    let [a1, a2] = a.value;
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(OtError::param("the linearized operator must be elliptic"));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(OtError::param(format!("radius must lie in (0, 1], got {r}")));
    }
    let m = ((r / v.h) * (1.0 + 1e-12)).floor() as usize;
    let nodes = (m + 1).min(v.n);
    if nodes < MIN_FIT_NODES {
        return Err(OtError::param(format!(
            "radius {r} spans only {nodes} nodes per side; need {MIN_FIT_NODES}"
        )));
    }
    let p21 = p21.unwrap_or_else(|| 0.5 * crate::plt::d11_at_origin(v));
    let p22 = -a1 * p21 / a2;
    let [g1, g2] = a.gradient;
    let p31 = -(2.0 * p21 * g1[0] + 2.0 * p22 * g2[0]) / (6.0 * a1);
    let p32 = -(2.0 * p21 * g1[1] + 2.0 * p22 * g2[1]) / (6.0 * a2);
    let mut poly = PolyApprox {
        p0: 0.0,
        p21,
        p22,
        p31,
        p32,
        approximating: false,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..nodes {
        for i in 0..nodes {
            let d = v.at(i, j) - poly.eval(v.coord(i), v.coord(j));
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    poly.p0 = 0.5 * (lo + hi);
    let scale = 1.0 + poly.norm() * (a1 + a2 + g1[0].abs() + g1[1].abs() + g2[0].abs() + g2[1].abs());
    poly.approximating = poly.constraint_residuals(a).iter().all(|d| d.abs() <= 1e-12 * scale);
    Ok(PolyFit {
        poly,
        residual: 0.5 * (hi - lo),
        radius: (nodes - 1) as f64 * v.h,
        nodes_per_side: nodes,
    })
}

/// Slope of `log residual` against `log r`, minus 3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityFit {
    /// `+inf` when the residuals vanish (polynomial data).
    pub alpha: f64,
    pub polynomial: bool,
    pub slope: f64,
    pub log_constant: f64,
    /// Largest deviation of a point from the fitted line, in log units.
    pub max_log_deviation: f64,
    pub table: Vec<(f64, f64)>,
}

impl RegularityFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,residual\n");
        for &(r, e) in &self.table {
            push_row(&mut out, &[r, e]);
        }
        out
    }
}

/// Residuals at or below this are treated as exact polynomial agreement.
pub const ZERO_RESIDUAL: f64 = 1e-13;

pub fn regularity_exponent(table: &[(f64, f64)]) -> Result<RegularityFit> {
    if table.len() < 3 {
        return Err(OtError::param("need at least three radii"));
    }
    if table.windows(2).any(|w| !(w[1].0 < w[0].0)) || table.iter().any(|&(r, e)| !(r > 0.0) || !(e >= 0.0)) {
        return Err(OtError::param("radii must be positive and strictly decreasing, residuals non-negative"));
    }
    if table.iter().any(|&(_, e)| e <= ZERO_RESIDUAL) {
        return Ok(RegularityFit {
            alpha: f64::INFINITY,
            polynomial: true,
            slope: f64::INFINITY,
            log_constant: f64::NAN,
            max_log_deviation: 0.0,
            table: table.to_vec(),
        });
    }
    let pts: Vec<(f64, f64)> = table.iter().map(|&(r, e)| (r.ln(), e.ln())).collect();
    let (slope, c) = least_squares_fit(&pts).ok_or_else(|| OtError::diagnostic("radii do not vary"))?;
    let dev = pts.iter().map(|&(x, y)| (y - c - slope * x).abs()).fold(0.0, f64::max);
    Ok(RegularityFit {
        alpha: slope - 3.0,
        polynomial: false,
        slope,
        log_constant: c,
        max_log_deviation: dev,
        table: table.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn barrier_values() {
        assert_eq!(barrier_eval(0.2, 0.0, 0.0).unwrap(), 0.2);
        // Oracle from the four closed-form terms at (0.5, 0).
        let oracle = 0.4 / std::f64::consts::PI * 0.5 * 0.5f64.ln() + 0.2 - 0.5 + 8.0;
        assert_relative_eq!(barrier_eval(0.2, 0.5, 0.0).unwrap(), oracle, epsilon = 1e-15);
        assert!((barrier_eval(0.2, 0.5, 0.0).unwrap() - 7.655873).abs() < 1e-6);
        assert!(matches!(barrier_eval(0.2, -0.1, 0.0), Err(OtError::Domain(_))));
    }

    #[test]
    fn barrier_is_harmonic() {
        assert!(barrier_laplacian(0.2, 0.3, 0.4, 1e-3).unwrap().abs() <= 1e-6);
        for eps in [0.1, 0.4] {
            assert!(barrier_harmonicity(eps, 100, 5).unwrap() <= 1e-5);
        }
        // The non-harmonic part alone is caught.
        let h = 1e-3;
        let q = |p: f64, x2: f64| p * p + x2 * x2;
        let lap = (q(0.5 + h, 0.1) + q(0.5 - h, 0.1) + q(0.5, 0.1 + h) + q(0.5, 0.1 - h) - 4.0 * q(0.5, 0.1)) / (h * h);
        assert!((lap - 4.0).abs() < 1e-6);
    }

    #[test]
    fn sign_threshold() {
        let t = barrier_sign_threshold(0.2).unwrap();
        // Balance of the two leading terms: p* ~ exp(-8 pi / eps).
        let scale = (-8.0 * std::f64::consts::PI / 0.2f64).exp();
        assert!(t.p_star > 0.5 * scale && t.p_star < 2.0 * scale);
        // Independent root check: the defining function changes sign across 1%.
        let k = 0.4 / std::f64::consts::PI;
        let h = |p: f64| k * p.ln() + 16.0 - 2.0 * p;
        assert!(h(t.p_star * 0.99) < 0.0 && h(t.p_star * 1.01) > 0.0);
        assert!(barrier_increment(0.2, t.p_star / 10.0, 0.0).unwrap() < 0.0);
        assert!(barrier_increment(0.2, t.p_star * 10.0, 0.0).unwrap() > 0.0);
        let t4 = barrier_sign_threshold(0.4).unwrap();
        assert!(t4.p_star > t.p_star);
        assert!(barrier_sign_threshold(1.0).is_err());
    }

    #[test]
    fn quadratic_is_its_own_approximation() {
        let v = ScalarGrid::from_fn(65, |p, x2| 0.5 * (p * p - x2 * x2)).unwrap();
        let fit = fit_approx_poly(&v, &LinearizedCoefficients::constant(1.0, 1.0), 0.5, Some(0.5)).unwrap();
        assert!(fit.residual <= 1e-12);
        assert!(fit.poly.approximating);
        assert_relative_eq!(fit.poly.p22, -0.5);
        assert_eq!((fit.poly.p31, fit.poly.p32), (0.0, 0.0));
        // Default p21 reads the same curvature off the grid.
        let auto = fit_approx_poly(&v, &LinearizedCoefficients::constant(1.0, 1.0), 0.5, None).unwrap();
        assert!((auto.poly.p21 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn harmonic_cubic_leaves_the_dropped_terms() {
        // v = x1^3 - 3 x1 x2^2 has d11 v(0) = 0, so P is constant and the
        // residual is the half-range of v on [0, r]^2: (r^3 + 2 r^3) / 2.
        let v = ScalarGrid::from_fn(65, |p, x2| p * p * p - 3.0 * p * x2 * x2).unwrap();
        let fit = fit_approx_poly(&v, &LinearizedCoefficients::constant(1.0, 1.0), 0.25, None).unwrap();
        assert_relative_eq!(fit.radius, 0.25);
        assert_relative_eq!(fit.residual, 1.5 * 0.25f64.powi(3), max_relative = 1e-10);
    }

    #[test]
    fn constraints_hold_with_gradients() {
        let v = ScalarGrid::from_fn(33, |p, x2| (p + x2).exp()).unwrap();
        let a = LinearizedCoefficients {
            value: [1.3, 0.7],
            gradient: [[0.2, -0.4], [1.1, 0.3]],
        };
        let fit = fit_approx_poly(&v, &a, 1.0, Some(0.8)).unwrap();
        assert!(fit.poly.constraint_residuals(&a).iter().all(|d| d.abs() <= 1e-12));
        assert!(fit.poly.approximating);
    }

    #[test]
    fn under_resolved_radius_is_rejected() {
        let v = ScalarGrid::from_fn(33, |p, _| p * p).unwrap();
        let a = LinearizedCoefficients::constant(1.0, 1.0);
        assert!(matches!(fit_approx_poly(&v, &a, 0.2, None), Err(OtError::Parameter(_))));
    }

    #[test]
    fn synthetic_power_law() {
        let t: Vec<(f64, f64)> = [0.2f64, 0.1, 0.05].iter().map(|&r| (r, r.powf(3.5))).collect();
        let fit = regularity_exponent(&t).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-10);
        let flat = regularity_exponent(&[(0.2, 0.0), (0.1, 0.0), (0.05, 0.0)]).unwrap();
        assert!(flat.polynomial && flat.alpha == f64::INFINITY);
        assert!(regularity_exponent(&[(0.1, 1.0), (0.2, 1.0), (0.05, 1.0)]).is_err());
    }
}
