//! Bounding-box tree over weighted sites.
//!
//! A node stores the bounding box of its sites and their largest weight, so
//! `dist(x, box)^2 - w_max` bounds the power distance of every site in it
//! from below. Searches are driven by that bound rather than by distance to
//! the site, which keeps them local even when the weights move cells far
//! away from their sites.

use crate::geometry::{HalfPlane, LabeledPolygon, Point};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
struct Node {
    lo: Point,
    hi: Point,
    /// Maximum weight over the node.
    w_max: f64,
    start: usize,
    end: usize,
    /// Child indices, `None` on leaves.
    children: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub(crate) struct SiteTree {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl SiteTree {
    pub(crate) fn new(sites: &[Point], weights: &[f64]) -> Self {
        let mut t = SiteTree {
            nodes: Vec::with_capacity(2 * sites.len() / LEAF_SIZE + 1),
            order: (0..sites.len()).collect(),
        };
        if !sites.is_empty() {
            t.build(sites, weights, 0, sites.len());
        }
        t
    }

    fn build(&mut self, sites: &[Point], weights: &[f64], start: usize, end: usize) -> usize {
        let idx = &mut self.order[start..end];
        let (mut lo, mut hi) = (sites[idx[0]], sites[idx[0]]);
        let mut w_max = f64::NEG_INFINITY;
        for &i in idx.iter() {
            let p = sites[i];
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            w_max = w_max.max(weights[i]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            w_max,
            start,
            end,
            children: None,
        });
        if end - start > LEAF_SIZE {
            let mid = (end - start) / 2;
            if hi.x - lo.x >= hi.y - lo.y {
                idx.select_nth_unstable_by(mid, |&a, &b| sites[a].x.total_cmp(&sites[b].x).then(a.cmp(&b)));
            } else {
                idx.select_nth_unstable_by(mid, |&a, &b| sites[a].y.total_cmp(&sites[b].y).then(a.cmp(&b)));
            }
            let l = self.build(sites, weights, start, start + mid);
            let r = self.build(sites, weights, start + mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    fn box_dist2(n: &Node, x: Point) -> f64 {
        let dx = (n.lo.x - x.x).max(0.0).max(x.x - n.hi.x);
        let dy = (n.lo.y - x.y).max(0.0).max(x.y - n.hi.y);
        dx * dx + dy * dy
    }

    /// Index minimizing `|x - y_i|^2 - w_i`, lowest index on ties.
    pub(crate) fn owner(&self, sites: &[Point], weights: &[f64], x: Point) -> usize {
        let mut best = usize::MAX;
        let mut best_val = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            let lb = Self::box_dist2(n, x) - n.w_max;
            // The slack absorbs rounding in the box distance.
            if lb - 1e-12 * (1.0 + lb.abs()) > best_val {
                continue;
            }
            match n.children {
                None => {
                    for &i in &self.order[n.start..n.end] {
                        let v = (x - sites[i]).norm2() - weights[i];
                        if v < best_val || (v == best_val && i < best) {
                            best_val = v;
                            best = i;
                        }
                    }
                }
                Some((l, r)) => {
                    let (dl, dr) = (Self::box_dist2(&self.nodes[l], x), Self::box_dist2(&self.nodes[r], x));
                    if dl <= dr {
                        stack.extend([r, l]);
                    } else {
                        stack.extend([l, r]);
                    }
                }
            }
        }
        best
    }

    /// Clips `cell` against the power half-planes of every site that can
    /// cut it. A node can only cut where some vertex `x` of the cell has
    /// `|x - y_i|^2 - w_i > dist(x, box)^2 - w_max`. The difference of the
    /// two sides is convex in `x`, so checking the vertices suffices.
    pub(crate) fn clip_cell(&self, sites: &[Point], weights: &[f64], i: usize, cell: &mut LabeledPolygon) {
        let yi = sites[i];
        let wi = weights[i];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            let mut gap = f64::NEG_INFINITY;
            let mut scale: f64 = 1.0;
            for x in &cell.pts {
                let own = (*x - yi).norm2() - wi;
                let other = Self::box_dist2(n, *x) - n.w_max;
                gap = gap.max(own - other);
                scale = scale.max(own.abs()).max(other.abs());
            }
            if gap < -1e-12 * scale {
                continue;
            }
            match n.children {
                None => {
                    for &j in &self.order[n.start..n.end] {
                        if j == i {
                            continue;
                        }
                        cell.clip(&power_half_plane(sites, weights, i, j), j);
                        if cell.is_empty() {
                            return;
                        }
                    }
                }
                Some((l, r)) => {
                    let (dl, dr) = (Self::box_dist2(&self.nodes[l], yi), Self::box_dist2(&self.nodes[r], yi));
                    if dl <= dr {
                        stack.extend([r, l]);
                    } else {
                        stack.extend([l, r]);
                    }
                }
            }
        }
    }
}

/// `{x : |x - y_i|^2 - w_i <= |x - y_j|^2 - w_j}`.
pub(crate) fn power_half_plane(sites: &[Point], weights: &[f64], i: usize, j: usize) -> HalfPlane {
    let yi = sites[i];
    let d = sites[j] - yi;
    let dist = d.norm2().sqrt();
    let t = (dist * dist + weights[i] - weights[j]) / (2.0 * dist);
    let normal = d * (1.0 / dist);
    HalfPlane {
        normal,
        offset: yi.dot(normal) + t,
    }
}
