//! Mesh-convergence driver.

use super::geometry::Geometry;
use super::participation::{participations_at, ParticipationSet};
use super::solve::FieldSolution;
use crate::error::{Error, RefinementStep, Result, Trajectory};

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    /// Refuse a level whose predicted unknown count exceeds this.
    pub max_unknowns: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { max_unknowns: 3_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub result: ParticipationSet,
    /// Field at the finest level.
    pub solution: FieldSolution,
    pub trajectory: Vec<RefinementStep>,
}

impl Refinement {
    /// Number of halvings applied after the first level.
    pub fn refinements(&self) -> usize {
        self.trajectory.len() - 1
    }
}

fn relative_change(prev: &ParticipationSet, next: &ParticipationSet) -> f64 {
    prev.values()
        .iter()
        .zip(next.values())
        .map(|(a, b)| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (b - a).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

pub fn refine_until_converged<G: Geometry>(geom: &G, tolerance: f64) -> Result<ParticipationSet> {
    refine_with(geom, tolerance, &RefineOptions::default()).map(|r| r.result)
}

/// Halve the grid spacing until no participation moves by `tolerance` or more.
pub fn refine_with<G: Geometry>(geom: &G, tolerance: f64, opts: &RefineOptions) -> Result<Refinement> {
    if !(tolerance > 0.0 && tolerance <= 0.1) {
        return Err(Error::Precondition(format!("tolerance must lie in (0, 0.1], got {tolerance}")));
    }
    let mut level = geom.cells_per_gap();
    let mut trajectory = Vec::new();
    let mut prev: Option<ParticipationSet> = None;
    loop {
        let (sol, mut set) = participations_at(&geom.with_cells_per_gap(level))?;
        let change = prev.as_ref().map(|p| relative_change(p, &set));
        trajectory.push(RefinementStep {
            cells_per_gap: level,
            unknowns: set.unknowns,
            p_sm: set.p_sm,
            p_sv: set.p_sv,
            p_mv: set.p_mv,
            max_relative_change: change,
        });
        if let Some(c) = change {
            if c < tolerance {
                set.error_estimate = Some(c);
                return Ok(Refinement {
                    result: set,
                    solution: sol,
                    trajectory,
                });
            }
        }
        if 4 * set.unknowns > opts.max_unknowns {
            return Err(Error::ConvergenceNotReached {
                trajectory: Trajectory(trajectory),
            });
        }
        prev = Some(set);
        level *= 2;
    }
}
