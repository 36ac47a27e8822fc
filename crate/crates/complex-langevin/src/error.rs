use thiserror::Error;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("odd moment p={0} requested; only even moments are represented")]
    OddMoment(usize),

    #[error("inexact integer division in coefficient recursion at p={p}, n={n}")]
    InexactDivision { p: usize, n: usize },

    #[error("operator iterate does not match the expected series structure at p={p}, n={n}: {detail}")]
    StructuralMismatch { p: usize, n: usize, detail: String },

    #[error("coefficient table lacks (p={p}, n={n})")]
    MissingCoefficient { p: usize, n: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("overflow while evaluating {0}")]
    Overflow(String),

    #[error("supertask recursion violated at n={n}: residual {residual:e}")]
    RecursionViolation { n: usize, residual: f64 },

    #[error("grid too coarse for differentiation: Richardson mismatch {0:e}")]
    GridTooCoarse(f64),

    #[error("non-finite state in trajectory {index} at t={t}")]
    NonFiniteState { index: u64, t: f64 },

    #[error("{excluded} of {total} trajectories diverged, above the allowed fraction")]
    TooManyDiverged { excluded: u64, total: u64 },

    #[error("no fit: {0}")]
    FitFailed(String),

    #[error("eigensolver failed for {rows}x{rows} matrix: {detail}")]
    Eigensolver { rows: usize, detail: String },

    #[error("inverse iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("boundary mass {0:e} exceeds the grid tolerance")]
    BoundaryMass(f64),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
