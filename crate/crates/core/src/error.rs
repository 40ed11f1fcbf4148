use thiserror::Error;

/// Errors produced while building data, stepping, or running diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-positive density {value} at cell {cell}")]
    NonPositiveDensity { cell: usize, value: f64 },

    #[error("temperature must vanish at x = {endpoint} for NSF runs, found {value}")]
    TemperatureEndpoint { endpoint: f64, value: f64 },

    #[error("negative temperature {value} at node {node}")]
    NegativeTemperature { node: usize, value: f64 },

    #[error("zero total mass")]
    ZeroMass,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-positive stretch eta_x = {value} at cell {cell}")]
    NonPositiveStretch { cell: usize, value: f64 },

    #[error("zero pivot in tridiagonal solve at row {row}")]
    SingularSystem { row: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reference coordinate {0} outside [-1, 1]")]
    OutOfDomain(f64),

    #[error("profile does not match alpha = {alpha}: residual {residual}")]
    ProfileMismatch { alpha: f64, residual: f64 },

    #[error("non-positive value {value} at index {index} in fit window")]
    NonPositiveSeries { index: usize, value: f64 },

    #[error("missing field: {0}")]
    MissingField(&'static str),

    #[error("time {t} outside sampled horizon [0, {t_end}]")]
    OutsideHorizon { t: f64, t_end: f64 },

    #[error("ODE step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Config { line: Option<usize>, key: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
