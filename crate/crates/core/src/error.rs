use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("field has {got} values, grid has {expected} cells")]
    FieldLength { expected: usize, got: usize },

    #[error("non-finite value in field at cell {cell}")]
    NonFiniteField { cell: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid Lévy measure: {0}")]
    InvalidLevyMeasure(String),

    #[error("invalid Young measure: {0}")]
    InvalidYoungMeasure(String),

    #[error("time {t} outside horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("trajectory does not cover [0, {horizon}] (ends at {end})")]
    IncompleteTrajectory { end: f64, horizon: f64 },

    #[error("non-finite state at t = {time}, cell {cell}")]
    NonFiniteState { time: f64, cell: usize },

    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("optimization failed: {0}")]
    Optimization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
