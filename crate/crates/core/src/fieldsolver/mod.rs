//! Two-dimensional electrostatics of planar conductors and thin-film
//! interface participation.

mod geometry;
mod grid;
pub mod io;
mod participation;
mod refine;
mod solve;

pub use geometry::{
    Conductor, ConductorRole, CpwGeometry, CrossSection, FinitePlates, Geometry, InterfaceKind,
    InterfaceLayer, LateralBoundary, Layers, Meshing, ParallelPlate, Rect,
};
pub use grid::{CellKind, Grid};
pub use io::GeometrySpec;
pub use participation::{compute_participations, participations_at, ConductorShare, ParticipationSet};
pub use refine::{refine_until_converged, refine_with, RefineOptions, Refinement};
pub use solve::{solve, solve_with, BoundarySample, FieldSolution, Side, SolverOptions, EPSILON_0};

use crate::error::Result;

/// Solve a CPW cross-section with the center trace at `v_center`.
pub fn solve_cross_section(geom: &CpwGeometry, v_center: f64) -> Result<FieldSolution> {
    solve(&geom.cross_section()?, v_center)
}
