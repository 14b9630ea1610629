//! Planar optimal-transport laboratory.
//!
//! The crate builds explicit planar domains and densities, computes optimal
//! transport maps between them by two independent routes, and measures the
//! (dis)continuity of the results:
//!
//! * [`geometry`]: polygons, half-plane clipping and the domain family
//!   (notched rectangle, dumbbell, smoothed notch, discs).
//! * [`density`]: the analytic density family `c * (1 + a x1 x2)`.
//! * [`sdot`]: semi-discrete transport solved by damped Newton on the
//!   Kantorovich dual, with the map represented by a Laguerre diagram.
//! * [`probes`]: jump profiles, subdifferential image measures, split-point
//!   estimates, Hölder fits and boundary-preservation checks.
//! * [`plt`]: square-to-square transport through the partial Legendre
//!   transform, a quasi-linear Neumann problem solved by Picard iteration.
//! * [`witnesses`]: the harmonic barrier and the approximating-polynomial
//!   diagnostics.
//!
//! Data-parallel loops go through [`exec`]; with the `parallel` feature
//! disabled everything runs sequentially and produces identical results.

// Parameter guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod plt;
pub mod probes;
pub mod sdot;
pub mod witnesses;

pub use density::DensityField;
pub use error::{OtError, Result};
pub use exec::Exec;
pub use geometry::{DomainSpec, Point, Polygon};
pub use sdot::{DiscreteMeasure, LaguerreDiagram, SolverOptions};
