use std::path::PathBuf;

use crate::grid::Space;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is in {actual:?} space, expected {expected:?}")]
    SpaceMismatch { expected: Space, actual: Space },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("number of regularization terms M = {0} is outside 0..=8")]
    InvalidTermCount(usize),

    #[error("semiclassical parameter must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("spectral index ({0}, {1}) is outside the grid")]
    IndexOutOfRange(usize, usize),

    #[error("derivative order {requested} exceeds the allowed maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },

    #[error("potential file {path:?} does not match the grid: {reason}")]
    PotentialMismatch { path: PathBuf, reason: String },

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error("malformed field file: {0}")]
    FieldFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
