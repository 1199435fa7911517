use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate field: norm is zero")]
    DegenerateField,

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("packet does not fit: {0}")]
    PacketDoesNotFit(String),

    #[error("point ({x}, {y}) is not on the billiard wall")]
    NotOnWall { x: f64, y: f64 },

    #[error("norm drift {drift:.3e} at t = {t} exceeds tolerance {tolerance:.1e}")]
    NormDrift { t: f64, drift: f64, tolerance: f64 },

    #[error("decomposition captures only {captured:.6} of the norm")]
    InsufficientCoverage { captured: f64 },

    #[error("resolution supports at most {max_count} states in this sector, {requested} requested")]
    InsufficientResolution { requested: usize, max_count: usize },

    #[error("too few {what}: got {got}, need at least {need}")]
    TooFewSamples {
        what: &'static str,
        got: usize,
        need: usize,
    },

    #[error("too many levels for the gap scan: {got} > {max}; truncate the spectrum")]
    TooManyLevels { got: usize, max: usize },

    #[error("unsupported observable: {0}")]
    UnsupportedObservable(String),

    #[error("window [{start}, {end}] is not covered by data spanning [{available_start}, {available_end}]")]
    WindowOutOfRange {
        start: f64,
        end: f64,
        available_start: f64,
        available_end: f64,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("empty section: {0}")]
    EmptySection(String),

    #[error("rejection sampling acceptance {rate:.2e} below {min:.0e}: {hint}")]
    LowAcceptance {
        rate: f64,
        min: f64,
        hint: &'static str,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
