use thiserror::Error;

use crate::ribsel::Candidate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("zero diagonal entry at index {index}")]
    SingularDiagonal { index: usize },

    #[error("nonpositive diagonal entry {value} at index {index}; compose with the sign multiplier first")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("block size {0} is odd")]
    OddBlockSize(usize),

    #[error("enumeration of {count} outcomes exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("insufficient dimension: need {needed}, have {have}")]
    InsufficientDimension { needed: usize, have: usize },

    #[error("block search failed after {evaluated} candidates: best value {best_value} < threshold {threshold}")]
    SearchExhausted {
        evaluated: u128,
        best_value: f64,
        threshold: f64,
    },

    #[error("trial budget of {trials} exhausted without an accepted sample")]
    TrialBudgetExhausted {
        trials: u64,
        best: Option<Box<Candidate>>,
        deficit: f64,
    },

    #[error(
        "no subset size lies in [{low}, {high}] (alpha*n = {mean}); no sample can be accepted"
    )]
    EmptyAcceptanceWindow { low: f64, high: f64, mean: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid block system: {0}")]
    InvalidBlockSystem(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Budget or guarantee failures, as opposed to bad input or broken contracts.
    pub fn is_budget_failure(&self) -> bool {
        matches!(
            self,
            Error::TrialBudgetExhausted { .. }
                | Error::SearchExhausted { .. }
                | Error::EmptyAcceptanceWindow { .. }
        )
    }
}
