//! Data reduction with quantization constraints for two-sensor decentralized
//! inference.
//!
//! The crate is organized around a finite joint probability model over a
//! parameter, an optional hidden variable, and two sensor observations:
//!
//! * [`model`] holds the joint tensor, statistics (deterministic maps on an
//!   observation alphabet), cost matrices, and a strict JSON file format.
//! * [`sufficiency`] checks local and global sufficiency, conditional
//!   independence, hidden-variable (two-chain) structure, and the
//!   factorization condition that licenses lossless one-sided reduction.
//! * [`quantizer`] evaluates Bayes risk for quantizer/fusion designs, runs
//!   exhaustive search over canonical quantizer labelings, and implements
//!   person-by-person optimization (PBPO).
//! * [`verify`] generates seeded random models and runs the named
//!   verification suites that tie the previous two modules together.
//! * [`scenarios`] provides two continuous Monte Carlo scenarios (Gaussian
//!   location estimation and spectrum sensing) bridged into the discrete
//!   engine by quantile binning.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod model;
pub mod quantizer;
pub mod rng;
pub mod scenarios;
pub mod sufficiency;
pub mod verify;

use thiserror::Error;

/// Errors shared by every module in this crate.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A probability entry was below the rejection floor.
    #[error("negative probability {value:e} at {cell}")]
    NegativeProbability {
        /// Human-readable description of the offending cell or row.
        cell: String,
        /// The offending value.
        value: f64,
    },
    /// A probability row (or the whole joint tensor) did not sum to one.
    #[error("{table} row {row} sums to {sum} (expected 1 within {eps:e})")]
    RowNotNormalized {
        /// Which table the row belongs to, e.g. `"prior"` or `"x1|w"`.
        table: String,
        /// Row index within the table; 0 for the joint tensor itself.
        row: usize,
        /// Observed row sum.
        sum: f64,
        /// Tolerance the sum was checked against.
        eps: f64,
    },
    /// Two pieces of data disagree about an alphabet, axis, or shape.
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    /// An axis subset that must be nonempty was empty.
    #[error("axis subset is empty")]
    EmptySubset,
    /// Conditioning on an event of probability zero.
    #[error("conditioning event has zero probability: {0}")]
    NullConditioningEvent(String),
    /// A model is too degenerate for the requested operation.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    /// A hidden-variable operation was applied to a model without a `w` axis.
    #[error("model has no hidden-variable axis")]
    MissingHiddenAxis,
    /// The one-sided factorization condition does not hold.
    #[error("factorization check failed: max deviation {max_deviation:e} exceeds {eps:e}")]
    FactorizationFails {
        /// Largest observed deviation between conditional slices.
        max_deviation: f64,
        /// Tolerance the deviation was checked against.
        eps: f64,
    },
    /// Exhaustive search would enumerate more candidates than allowed.
    #[error("{candidates} candidate labelings exceed budget {budget}")]
    BudgetExceeded {
        /// Number of canonical candidate pairs the search would visit.
        candidates: u128,
        /// Configured budget.
        budget: u128,
    },
    /// An empirical operation was given too few samples.
    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples {
        /// Minimum sample count for the requested binning.
        required: usize,
        /// Samples actually provided.
        got: usize,
    },
    /// A covariance matrix required for a closed form was singular.
    #[error("covariance matrix is singular")]
    SingularCovariance,
    /// A parameter violated its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A model file violated the schema.
    #[error("model file: {0}")]
    Schema(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
