use thiserror::Error;

use crate::grid::GridInterval;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty domain: right endpoint {b} must exceed left endpoint {a}")]
    EmptyDomain { a: f64, b: f64 },
    #[error("non-finite grid endpoint ({a}, {b})")]
    NonFiniteEndpoint { a: f64, b: f64 },
    #[error("n_cells = {0} must be a power of two and at least 2")]
    BadCellCount(usize),
    #[error("step function has {got} values, grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} in cell {cell}")]
    NonFiniteValue { cell: usize, value: f64 },
    #[error("interval [{start}, {end}) is not a nonempty cell range of a grid with {n_cells} cells")]
    BadInterval { start: usize, end: usize, n_cells: usize },
    #[error("coordinate {0} is not a grid point")]
    NotAGridPoint(f64),
    #[error("exponent q = {0} must be at least 1")]
    ExponentBelowOne(f64),
    #[error("exponent p = {0} must be finite and greater than 1")]
    BadApExponent(f64),
    #[error("invalid parameter {name} = {value}: {reason}")]
    BadParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("power weight with alpha = {0} is not locally integrable at the origin")]
    NonIntegrable(f64),
    #[error("custom weight value {value} in cell {cell} is negative")]
    NegativeWeight { cell: usize, value: f64 },
    #[error("interval family: {0}")]
    BadFamily(String),
    #[error("family `{family}` on {n_cells} cells is too large for oscillation functionals (limit 1024 cells for all-aligned)")]
    FamilyTooLarge { family: String, n_cells: usize },
    #[error("interval {0:?} carries zero weighted mass")]
    DegenerateInterval(GridInterval),
    #[error("degenerate norm: {0}")]
    DegenerateNorm(&'static str),
    #[error("operator parameter rejected: {0}")]
    IncompatibleOperator(String),
    #[error("grids differ: {0}")]
    GridMismatch(&'static str),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),
    #[error("weight failed the A_1 gate: characteristic {value} on {n_cells} cells, {refined} after refinement")]
    NotA1 { value: f64, refined: f64, n_cells: usize },
    #[error("{path}: {message}")]
    Scenario { path: String, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario { path: path.into(), message: message.into() }
    }
}
