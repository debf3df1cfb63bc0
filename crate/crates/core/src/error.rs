// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |m_ij - conj(m_ji)| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("trace deviates from one by {deviation:e}")]
    TraceDeviation { deviation: f64 },

    #[error("negative eigenvalue {value:e}")]
    NegativeEigenvalue { value: f64 },

    #[error("eigensolver did not converge")]
    EigensolverFailure,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary: max |U'U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not doubly stochastic: {detail}")]
    NotDoublyStochastic { detail: String },

    #[error("invalid rate matrix: {0}")]
    InvalidRates(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invariant violated at t = {time}: {detail}")]
    InvariantViolation { time: f64, detail: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("grid underflow at t = {time}: propagated point left the simplex by {excess:e}")]
    GridUnderflow { time: f64, excess: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}
