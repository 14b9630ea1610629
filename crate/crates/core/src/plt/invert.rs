//! Recovery of the transport map from the transformed potential.
//!
//! At the node `(p, x2)` the source point is `x = (d1 u*, x2)` and its image
//! is `T(x) = (p, -d2 u*)`. Derivatives use centred differences inside and
//! second-order one-sided differences on the edges, so the recovered map is
//! exact for quadratic `u*`.

use serde::{Deserialize, Serialize};

use crate::error::{OtError, Result};
use crate::geometry::Point;
use crate::probes::TransportSamples;

use super::ScalarGrid;

fn derivative(values: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> f64 {
    if k == 0 {
        (-3.0 * values(0) + 4.0 * values(1) - values(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * values(n - 1) - 4.0 * values(n - 2) + values(n - 3)) / (2.0 * h)
    } else {
        (values(k + 1) - values(k - 1)) / (2.0 * h)
    }
}

/// Node-wise `(x, T(x))` pairs, ordered like the grid.
pub fn invert_plt(ustar: &ScalarGrid) -> Result<TransportSamples> {
    let (n, h) = (ustar.n, ustar.h);
    let mut pairs = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..n {
            let x1 = derivative(|k| ustar.at(k, j), i, n, h);
            let t2 = -derivative(|k| ustar.at(i, k), j, n, h);
            if !(x1 > prev) {
                return Err(OtError::diagnostic(format!(
                    "d1 u* is not increasing in p on row {j} at node {i}; the potential is not strictly convex"
                )));
            }
            prev = x1;
            pairs.push((Point::new(x1, j as f64 * h), Point::new(i as f64 * h, t2)));
        }
    }
    Ok(TransportSamples {
        pairs,
        spacing: h,
        diameter: std::f64::consts::SQRT_2,
        seed: 0,
    })
}

/// Piecewise-linear interpolant of the recovered map on `Q`.
///
/// Source points of one grid row share the height `x2 = j h`; inside a row
/// the map is interpolated linearly in `x1`, and consecutive rows are
/// blended linearly in `x2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PltMap {
    n: usize,
    h: f64,
    x1: Vec<f64>,
    image: Vec<Point>,
}

impl PltMap {
    pub fn new(ustar: &ScalarGrid) -> Result<Self> {
        let s = invert_plt(ustar)?;
        Ok(PltMap {
            n: ustar.n,
            h: ustar.h,
            x1: s.pairs.iter().map(|(x, _)| x.x).collect(),
            image: s.pairs.iter().map(|&(_, t)| t).collect(),
        })
    }

    fn along_row(&self, j: usize, x1: f64) -> Point {
        let n = self.n;
        let row = &self.x1[j * n..(j + 1) * n];
        let img = &self.image[j * n..(j + 1) * n];
        if x1 <= row[0] {
            return img[0];
        }
        if x1 >= row[n - 1] {
            return img[n - 1];
        }
        let k = row.partition_point(|&v| v <= x1).clamp(1, n - 1);
        let w = (x1 - row[k - 1]) / (row[k] - row[k - 1]);
        img[k - 1] * (1.0 - w) + img[k] * w
    }

    /// `T(x)`; points outside `Q` are clamped onto it.
    pub fn eval(&self, x: Point) -> Point {
        let t = (x.y.clamp(0.0, 1.0) / self.h).min((self.n - 1) as f64);
        let j = (t.floor() as usize).min(self.n - 2);
        let w = t - j as f64;
        let x1 = x.x.clamp(0.0, 1.0);
        self.along_row(j, x1) * (1.0 - w) + self.along_row(j + 1, x1) * w
    }
}
