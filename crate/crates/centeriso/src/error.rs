//! Error type shared by every module of the workbench.

use thiserror::Error;

/// Failures reported by the numerical operations and the command layer.
///
/// Variants are grouped so that the command layer can map them onto process
/// exit codes: input problems, tolerance failures and budget overruns.
#[derive(Debug, Error)]
pub enum Error {
    /// A point, matrix or vector has the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A configured guard (iteration count, period, grid size) was exceeded.
    #[error("guard exceeded: {what} = {value} exceeds the limit {limit}")]
    Guard {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    /// The system or potential description is not valid.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative procedure failed to converge.
    #[error("no convergence in {what}: {detail}")]
    Convergence { what: &'static str, detail: String },

    /// A truncated series or product has a tail bound above the requested tolerance.
    #[error("truncation too short for {what}: tail bound {bound:e} exceeds tolerance {tol:e}; increase the depth")]
    Truncation {
        what: &'static str,
        bound: f64,
        tol: f64,
    },

    /// A local construction left its validity radius.
    #[error("locality violated: {0}")]
    Locality(String),

    /// The requested computation exceeds the configured compute budget.
    #[error("compute budget exceeded: {what} needs {needed:e} operations, budget is {budget:e}")]
    Budget {
        what: &'static str,
        needed: f64,
        budget: f64,
    },

    /// A Monte Carlo estimator received too few hits to be meaningful.
    #[error("starvation in {what}: only {hits} hits at depth {depth}")]
    Starvation {
        what: &'static str,
        hits: usize,
        depth: usize,
    },

    /// The operation is not available for this system or potential.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A verification check exceeded its tolerance.
    #[error("tolerance failure: {0}")]
    Tolerance(String),

    /// Extended-precision arithmetic could not deliver the requested accuracy.
    #[error("precision exhausted: {0}")]
    Precision(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
