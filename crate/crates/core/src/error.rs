//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any otloss operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix dimensions do not satisfy an operation's contract.
    #[error("invalid shape: expected {expected}, got {actual}")]
    InvalidShape { expected: String, actual: String },

    /// A token span does not fit the sequence it addresses.
    #[error("invalid span [{start}, {end}) for sequence of length {len}")]
    InvalidSpan {
        start: usize,
        end: usize,
        len: usize,
    },

    /// A token id lies outside the vocabulary.
    #[error("token id {id} out of vocabulary (size {vocab})")]
    InvalidToken { id: usize, vocab: usize },

    /// A computation produced or encountered a non-finite value.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A composite objective references a loss component that was not supplied.
    #[error("missing loss component: {0}")]
    MissingComponent(String),

    /// An ingredient line carries no usable content.
    #[error("unparsable ingredient line: {0:?}")]
    UnparsableIngredient(String),

    /// A metric's denominator is empty, so the score is undefined.
    #[error("metric {0} is undefined for this input")]
    UndefinedMetric(&'static str),

    /// Corpus scoring found no pair on which any metric is defined.
    #[error("no metric is defined on any pair")]
    EmptyReport,

    /// A recipe violates the structural contract (empty lists or blank entries).
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
}

pub type Result<T> = std::result::Result<T, Error>;
