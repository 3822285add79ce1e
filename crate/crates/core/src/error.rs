use std::fmt;

use crate::resonance::ResonanceFit;

pub type Result<T> = std::result::Result<T, Error>;

/// One row of a mesh-refinement trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStep {
    pub cells_per_gap: usize,
    pub unknowns: usize,
    pub p_sm: Option<f64>,
    pub p_sv: Option<f64>,
    pub p_mv: Option<f64>,
    pub max_relative_change: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory(pub Vec<RefinementStep>);

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "[cells_per_gap={} unknowns={}", s.cells_per_gap, s.unknowns)?;
            for (name, p) in [("p_sm", s.p_sm), ("p_sv", s.p_sv), ("p_mv", s.p_mv)] {
                if let Some(p) = p {
                    write!(f, " {name}={p:.4e}")?;
                }
            }
            if let Some(c) = s.max_relative_change {
                write!(f, " change={c:.3e}")?;
            }
            write!(f, "] ")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("no resonance found: {0}")]
    NoResonance(String),

    #[error("fit diverged after {iterations} iterations")]
    FitDiverged {
        iterations: usize,
        last: Box<ResonanceFit>,
    },

    #[error("unidentifiable parameters: {0}")]
    Unidentifiable(String),

    #[error("degenerate abscissa: all points share n_sites = {0}")]
    DegenerateAbscissa(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolveFailed { iterations: usize, residual: f64 },

    #[error("interface not sampled: {0}")]
    InterfaceNotSampled(String),

    #[error("convergence not reached: {trajectory}")]
    ConvergenceNotReached { trajectory: Trajectory },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
