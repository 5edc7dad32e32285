use thiserror::Error;

use crate::mesh::BoundaryTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate tetrahedron {cell} (signed volume {volume:e})")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("point location walk did not terminate after {steps} steps (broken adjacency?)")]
    LocateCycle { steps: usize },

    #[error("particle at cell {cell} is not inside that cell")]
    StaleCellIndex { cell: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid emission input: {0}")]
    InvalidEmission(String),

    #[error("no surface point within the influence radius of face {face}")]
    OrphanFace { face: usize },

    #[error("points {first} and {second} are closer than {min_distance:e} m")]
    CoincidentPoints {
        first: usize,
        second: usize,
        min_distance: f64,
    },

    #[error("no boundary faces tagged {0:?}")]
    MissingBoundary(BoundaryTag),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("charge ledger does not close after step {step}: {residual} superparticles unaccounted for")]
    LedgerMismatch { step: u64, residual: i64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
