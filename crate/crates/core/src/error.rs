// SPDX-License-Identifier: Apache-2.0

//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not match what an operation requires.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input contains NaN or infinite entries.
    #[error("non-finite entries: {0}")]
    NonFinite(String),

    /// A matrix expected to be symmetric is not, beyond tolerance.
    #[error("matrix not symmetric: {0}")]
    NotSymmetric(String),

    /// A matrix expected to be positive definite failed its factorization.
    #[error("{0} not positive definite")]
    NotPositiveDefinite(String),

    /// A matrix expected to be positive semi-definite has a significantly
    /// negative eigenvalue.
    #[error("{0} not positive semi-definite (min eigenvalue {1:.3e})")]
    NotPositiveSemiDefinite(String, f64),

    /// A matrix required to have full column rank does not.
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    /// The rank condition of the unbiased filter fails: with H*B column-rank
    /// deficient no gain can satisfy the unbiasedness constraint.
    #[error("unbiased input estimation infeasible (rank HB deficient): {0}")]
    Infeasible(String),

    /// Filter states passed to the force estimator are not consecutive.
    #[error("states not consecutive: expected k and k+1, got {curr} and {next}")]
    Sequencing { curr: usize, next: usize },

    /// A scalar parameter is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A file-backed force signal ran out of samples.
    #[error("force sample file exhausted: needed step {step}, file has {len} entries")]
    ForceExhausted { step: u64, len: usize },

    /// Scenario configuration is structurally valid but violates a model
    /// invariant.
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
