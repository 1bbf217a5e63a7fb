use thiserror::Error;

/// Errors raised by the pricing and sensitivity engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows} rows, row {row} has {cols} columns)")]
    NotSquare {
        rows: usize,
        row: usize,
        cols: usize,
    },

    #[error("diagonal entry {index} is {value}, expected 1")]
    DiagonalNotOne { index: usize, value: f64 },

    #[error("correlation entry ({i}, {j}) = {value} lies outside [-1, 1]")]
    EntryOutOfRange { i: usize, j: usize, value: f64 },

    #[error("matrix is not positive semidefinite (pivot {index} = {pivot})")]
    NotPositiveSemidefinite { index: usize, pivot: f64 },

    #[error("Cholesky diagonal entry {index} = {value} is too small to differentiate through")]
    SingularPivot { index: usize, value: f64 },

    #[error("invalid correlation pair ({i}, {j}) for dimension {n}; need n > i > j")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument {value} outside the open interval (0, 1)")]
    DomainError { value: f64 },

    #[error("hazard rate must be positive and finite, got {value}")]
    NonPositiveHazard { value: f64 },

    #[error("invalid contract: {0}")]
    InvalidContract(String),

    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),

    #[error("standard errors need at least 2 bins, got {n_bins}")]
    NBinsTooSmall { n_bins: usize },

    #[error("bins have unequal path counts ({first} vs {other})")]
    UnequalBins { first: usize, other: usize },

    #[error("bump of pair ({i}, {j}) breaks positive semidefiniteness even at h = {h}")]
    BumpBreaksPsd { i: usize, j: usize, h: f64 },
}

impl Error {
    /// True for failures caused by the numerics (factorizability, pivots)
    /// rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemidefinite { .. }
                | Error::SingularPivot { .. }
                | Error::BumpBreaksPsd { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
