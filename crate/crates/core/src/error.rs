//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while loading data, building designs,
/// fitting, or post-processing a fit.
///
/// Numerical trouble *inside* the likelihood (overflow, out-of-support
/// parameters) is deliberately not an `Error`: the log-likelihood functions
/// signal it by returning `-inf` so the optimizer can route around it.
#[derive(Debug, Error)]
pub enum Error {
    /// File-system level failure, annotated with the offending path.
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Structurally bad input data: ragged rows, empty files, non-numeric
    /// cells.  The message names the row and column where known.
    #[error("malformed data in {path}: {message}")]
    MalformedData { path: String, message: String },

    /// A regressor or response name that does not exist in the dataset.
    #[error("column {0:?} not found in the data")]
    UnknownColumn(String),

    /// The response violates the support of these models.
    #[error("response column {column:?}: {message}")]
    BadResponse { column: String, message: String },

    /// Model specification inconsistent with the requested family.
    #[error("invalid model specification: {0}")]
    BadSpec(String),

    /// Vector/matrix shape disagreement.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Parameter values outside their domain (alpha <= 0, omega below its
    /// lower bound, and so on).
    #[error("invalid parameter value: {0}")]
    BadParams(String),

    /// An inference operation that requires a variance-covariance matrix was
    /// asked of a fit whose Hessian was singular or never computed.
    #[error("variance-covariance matrix unavailable: {0}")]
    NoVarCov(String),

    /// The operation only makes sense for one-inflated families.
    #[error("operation requires a one-inflated family, got {0}")]
    NotOneInflated(&'static str),

    /// A likelihood-ratio pair that is not actually nested (different data,
    /// different regressors, or mismatched families).
    #[error("models are not a nested pair: {0}")]
    NotNested(String),

    /// The one-inflated fit has a *lower* log-likelihood than its base model
    /// beyond rounding slack.  This can mean a failed maximization, but it
    /// also arises legitimately on data with no excess ones: the logistic
    /// inflation equation cannot always reproduce the base model's own
    /// ones-probabilities exactly, so the richer model can lose.  Either
    /// way the likelihood-ratio statistic is not positive, which is the
    /// opposite of evidence for one-inflation.
    #[error(
        "one-inflated log-likelihood {oi:.6} fell below the base model's {base:.6}; \
         the data show no likelihood gain from one-inflation"
    )]
    NestingViolation { oi: f64, base: f64 },

    /// Random variate generation gave up (rejection or inversion cap hit).
    #[error("variate generation exceeded {0} candidate draws; parameters are degenerate")]
    SamplerCap(usize),

    /// Bad simulation or CLI configuration.
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}
