//! Semi-discrete optimal transport from a polygon with an analytic density
//! to a weighted point cloud.

mod kdtree;
mod laguerre;
mod measure;
mod solver;

pub use laguerre::{laguerre_diagram, laguerre_diagram_with, LaguerreDiagram, CONTAINMENT_TOL};
pub use measure::{sample_target, sample_target_with, DiscreteMeasure, MAX_GRID_CELLS};
pub use solver::{solve_dual, solve_dual_with_stats, SolveStats, SolverOptions};
