// SPDX-License-Identifier: Apache-2.0
use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative or non-finite entry: {0}")]
    NegativeEntry(String),

    #[error("column {sector} violates constant returns: inputs + labor = {total}")]
    ColumnSumViolation { sector: usize, total: f64 },

    #[error("consumption weights sum to {0}, expected 1")]
    PreferenceSumViolation(f64),

    #[error("leverage of sector {sector} is {value}, expected a value in [0, 1]")]
    LeverageOutOfRange { sector: usize, value: f64 },

    #[error("spectral radius estimate {0:.12} of the input-output matrix is not below 1")]
    SpectralRadiusNotSubunit(f64),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("invalid shock model: {0}")]
    InvalidShock(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("conditioning cell {0} has zero probability")]
    EmptyCell(usize),

    #[error("rejection sampling acceptance rate {rate:.3e} is below the floor {floor:.0e}")]
    LowAcceptance { rate: f64, floor: f64 },

    #[error("analytic backend does not support this model: {0}")]
    UnsupportedAnalytic(String),

    #[error("shock is not concentrated on a single sector")]
    UnsupportedShock,

    #[error("root bracket failure: f(lo) = {f_lo:.3e}, f(hi) = {f_hi:.3e}")]
    BracketFailure { f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("debt profile is inconsistent with the economy: {0}")]
    InconsistentProfile(String),

    #[error("sector index {index} out of range for {len} sectors")]
    SectorOutOfRange { index: usize, len: usize },

    #[error("network weight alpha = {0} must lie in (0, 1)")]
    InvalidAlpha(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
