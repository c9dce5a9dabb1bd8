use thiserror::Error;

use crate::matcore::CVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// Polar data or a frame collapsed: a singular value fell below tolerance.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("eigenvalue {eigenvalue} lies within {tol} of cut point {boundary}; widen the gap")]
    AmbiguousCut {
        eigenvalue: f64,
        boundary: f64,
        tol: f64,
    },

    #[error("basis does not span a unital *-algebra (closure residual {residual:e})")]
    InvalidAlgebra { residual: f64 },

    #[error("matrix is not a projection (residual {residual:e})")]
    NotProjection { residual: f64 },

    #[error("map is not completely positive: Choi eigenvalue {min_eigenvalue:e}")]
    NotCompletelyPositive {
        min_eigenvalue: f64,
        witness: CVector,
    },

    #[error("map is not contractive at the unit: eigenvalue {eigenvalue} of T(1) exceeds 1")]
    NotContractive { eigenvalue: f64 },

    #[error("solver did not converge after {iterations} iterations (lower {lower}, upper {upper})")]
    SolverNonConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("no coordinate certifies; best certified upper bound {best}")]
    CoordinateNotFound {
        best: f64,
        traces: Vec<crate::splitting::CoordinateTrace>,
    },

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
