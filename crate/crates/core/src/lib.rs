//! Estimation of the L1 distance `Σ_i |p_i − q_i|` between discrete
//! distributions from sampled counts.
//!
//! The crate provides three estimator families under Poissonized (or
//! multinomial) sampling:
//!
//! * the plug-in MLE baseline, for known and unknown `Q`;
//! * a known-`Q` estimator that classifies each symbol into a smooth or
//!   non-smooth regime from one half of the sample and, in the non-smooth
//!   regime, replaces the plug-in by an unbiased estimate of a best
//!   polynomial approximation of `|x − q|` built from the other half;
//! * an unknown-`Q` estimator that does the same in two dimensions, with a
//!   product polynomial on the origin square and a scaled `|t|` approximant
//!   on a data-dependent diagonal stripe.
//!
//! Supporting machinery is exposed directly: best uniform polynomial
//! approximation via Remez exchange ([`poly`]), unbiased moment kernels under
//! Poisson sampling ([`unbiased`]), an exact truncated-series expectation
//! oracle ([`oracle`]), and a Monte Carlo risk harness ([`harness`]).

pub mod checks;
pub mod estimators;
pub mod files;
pub mod harness;
pub mod oracle;
pub mod poly;
pub mod prob;
pub mod rng;
pub mod unbiased;

pub use estimators::{EstimatorConfig, RegimeLabel, SplitMode};
pub use poly::{ApproxReport, BivarPolyCoeffs, PolyCoeffs};
pub use prob::{CountVector, Distribution, SplitCounts};
pub use rng::RngSeed;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("negative entry at index {0}")]
    NegativeEntry(usize),
    #[error("non-finite entry at index {0}")]
    NonFiniteEntry(usize),
    #[error("all entries are zero")]
    AllZero,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rate n = {0} too small (need n > {1})")]
    RateTooSmall(f64, f64),
    #[error("degree {degree} exceeds configured cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("Remez exchange did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("function returned a non-finite value at {0}")]
    NonFiniteFunction(f64),
    #[error(
        "series truncation hit the hard cap of {cap} terms before reaching the tail tolerance"
    )]
    TruncationCap { cap: usize },
    #[error("instance too large for exact enumeration: {0}")]
    InstanceTooLarge(String),
    #[error("estimator failed at grid cell (S = {s}, n = {n}): {source}")]
    CellFailure {
        s: usize,
        n: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed file {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
