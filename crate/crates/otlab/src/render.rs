//! SVG pictures of computed transports.
//!
//! Cells are outlined, a subset of displacement vectors is drawn as arrows
//! from source points to their images, and probe segments are highlighted.
//! Near a probe every cell gets its arrow, which is where a split shows up.

use std::fmt::Write as _;

use otlab_core::probes::TransportSamples;
use otlab_core::{LaguerreDiagram, Point, Polygon};
use serde::{Deserialize, Serialize};

/// Payload of a renderable artifact file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Renderable {
    Diagram {
        diagram: LaguerreDiagram,
        #[serde(default)]
        probes: Vec<[Point; 2]>,
    },
    Samples {
        samples: TransportSamples,
        #[serde(default)]
        probes: Vec<[Point; 2]>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgStyle {
    pub width_px: f64,
    /// Arrows drawn away from probes, at most.
    pub max_arrows: usize,
    /// Cells within this many spacings of a probe always get an arrow.
    pub probe_band: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width_px: 800.0,
            max_arrows: 600,
            probe_band: 4.0,
        }
    }
}

struct Frame {
    lo: Point,
    hi: Point,
    scale: f64,
    pad: f64,
}

impl Frame {
    fn new(points: impl Iterator<Item = Point>, width_px: f64) -> Frame {
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = Point::new(0.0, 0.0);
            hi = Point::new(1.0, 1.0);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let pad = 20.0;
        Frame {
            lo,
            hi,
            scale: (width_px - 2.0 * pad) / span,
            pad,
        }
    }

    fn size(&self) -> (f64, f64) {
        (
            (self.hi.x - self.lo.x) * self.scale + 2.0 * self.pad,
            (self.hi.y - self.lo.y) * self.scale + 2.0 * self.pad,
        )
    }

    /// Screen coordinates, `x2` pointing up.
    fn map(&self, p: Point) -> (f64, f64) {
        ((p.x - self.lo.x) * self.scale + self.pad, (self.hi.y - p.y) * self.scale + self.pad)
    }
}

fn header(out: &mut String, f: &Frame) {
    let (w, h) = f.size();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.1}\" height=\"{h:.1}\" viewBox=\"0 0 {w:.1} {h:.1}\">"
    );
    out.push_str(
        "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"5\" markerHeight=\"5\" orient=\"auto\">\
         <path d=\"M0,0 L10,5 L0,10 z\" fill=\"#c0392b\"/></marker></defs>\n",
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
}

fn polygon(out: &mut String, f: &Frame, p: &Polygon, style: &str) {
    if p.is_empty() {
        return;
    }
    out.push_str("<polygon points=\"");
    for (k, v) in p.vertices().iter().enumerate() {
        let (x, y) = f.map(*v);
        let sep = if k == 0 { "" } else { " " };
        let _ = write!(out, "{sep}{x:.3},{y:.3}");
    }
    let _ = writeln!(out, "\" {style}/>");
}

fn arrow(out: &mut String, f: &Frame, from: Point, to: Point) {
    let (x1, y1) = f.map(from);
    let (x2, y2) = f.map(to);
    if (x1 - x2).abs() + (y1 - y2).abs() < 0.5 {
        return;
    }
    let _ = writeln!(
        out,
        "<line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"#c0392b\" stroke-width=\"0.8\" marker-end=\"url(#head)\"/>"
    );
}

fn probe_segments(out: &mut String, f: &Frame, probes: &[[Point; 2]]) {
    for [a, b] in probes {
        let (x1, y1) = f.map(*a);
        let (x2, y2) = f.map(*b);
        let _ = writeln!(
            out,
            "<line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"#2471a3\" stroke-width=\"3\" stroke-opacity=\"0.7\"/>"
        );
    }
}

fn near_probe(p: Point, probes: &[[Point; 2]], band: f64) -> bool {
    probes.iter().any(|[a, b]| {
        let d = *b - *a;
        let t = if d.norm2() > 0.0 { ((p - *a).dot(d) / d.norm2()).clamp(0.0, 1.0) } else { 0.0 };
        p.dist(*a + d * t) <= band
    })
}

fn stride(n: usize, max: usize) -> usize {
    n.div_ceil(max.max(1)).max(1)
}

pub fn render_diagram(d: &LaguerreDiagram, probes: &[[Point; 2]], style: &SvgStyle) -> String {
    let pts = d.source.vertices().iter().copied().chain(d.sites.iter().copied());
    let f = Frame::new(pts, style.width_px);
    let mut out = String::new();
    header(&mut out, &f);
    out.push_str("<g id=\"cells\">\n");
    for c in &d.cells {
        polygon(&mut out, &f, c, "fill=\"none\" stroke=\"#b0b0b0\" stroke-width=\"0.4\"");
    }
    out.push_str("</g>\n");
    polygon(&mut out, &f, &d.source, "fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"");
    out.push_str("<g id=\"sites\" fill=\"#1e8449\">\n");
    for y in &d.sites {
        let (x, yy) = f.map(*y);
        let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{yy:.3}\" r=\"0.8\"/>");
    }
    out.push_str("</g>\n<g id=\"arrows\">\n");
    let band = style.probe_band * d.mean_spacing();
    let k = stride(d.len(), style.max_arrows);
    for (i, c) in d.cells.iter().enumerate() {
        let Some(from) = c.centroid() else { continue };
        if i % k == 0 || near_probe(from, probes, band) {
            arrow(&mut out, &f, from, d.sites[i]);
        }
    }
    out.push_str("</g>\n");
    probe_segments(&mut out, &f, probes);
    out.push_str("</svg>\n");
    out
}

pub fn render_samples(s: &TransportSamples, probes: &[[Point; 2]], style: &SvgStyle) -> String {
    let f = Frame::new(s.pairs.iter().flat_map(|&(x, t)| [x, t]), style.width_px);
    let mut out = String::new();
    header(&mut out, &f);
    out.push_str("<g id=\"arrows\">\n");
    let band = style.probe_band * s.spacing;
    let k = stride(s.len(), style.max_arrows);
    for (i, &(x, t)) in s.pairs.iter().enumerate() {
        if i % k == 0 || near_probe(x, probes, band) {
            arrow(&mut out, &f, x, t);
        }
    }
    out.push_str("</g>\n");
    probe_segments(&mut out, &f, probes);
    out.push_str("</svg>\n");
    out
}

pub fn render(r: &Renderable, style: &SvgStyle) -> String {
    match r {
        Renderable::Diagram { diagram, probes } => render_diagram(diagram, probes, style),
        Renderable::Samples { samples, probes } => render_samples(samples, probes, style),
    }
}
