//! Verification laboratory for the theory of overparametrized ReLU RNNs on
//! normalized sequences: deterministic numerics, sequence encodings, forward /
//! pseudo-network / decoder machinery, complexity measures, concept classes,
//! formal-language datasets, indicator fitting, and BPTT training.
//!
//! Everything is seeded through [`numerics::RngStream`]: the same root seed and
//! stream tags reproduce every matrix, sequence, and shuffle bit-for-bit,
//! regardless of whether weight matrices are materialized densely or streamed
//! row-by-row.

pub mod complexity;
pub mod concept;
pub mod fitting;
pub mod inversion;
pub mod languages;
pub mod numerics;
pub mod rnn;
pub mod sequences;
pub mod training;

use thiserror::Error;

/// Library-wide error type. Numeric routines return `Err` instead of panicking
/// on invalid arguments, dimension mismatches, non-finite intermediates, and
/// infeasible configurations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A computation produced NaN/Inf where finiteness is part of the contract.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// A numeric procedure failed to reach its contract (divergence,
    /// ill-conditioning beyond repair, empty feasible set where one is needed).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
    pub(crate) fn non_finite(msg: impl Into<String>) -> Self {
        Error::NonFinite(msg.into())
    }
    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
