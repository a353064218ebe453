//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum CalibraError {
    /// Input data or configuration violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The zero vector is not interior to the convex hull of the constraint
    /// rows, so no positive weights can satisfy the moment constraints.
    #[error("convex hull violation: {0}")]
    ConvexHullViolation(String),

    /// The constraint matrix is numerically rank deficient.
    #[error("rank deficiency: {0}")]
    RankDeficiency(String),

    /// The dual Newton iteration stalled without a conclusive diagnosis.
    #[error("empirical likelihood solve did not converge: {0}")]
    NotConverged(String),

    /// Membership model separates the two samples perfectly; matching
    /// distances would be meaningless.
    #[error("separation: {0}")]
    Separation(String),

    /// File input/output.
    #[error("i/o error: {0}")]
    Io(String),

    /// Malformed CSV content (row/column context included in the message).
    #[error("parse error: {0}")]
    Parse(String),
}

impl CalibraError {
    /// Process exit code for the CLI front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CalibraError::Validation(_) | CalibraError::Separation(_) => 2,
            CalibraError::ConvexHullViolation(_)
            | CalibraError::RankDeficiency(_)
            | CalibraError::NotConverged(_) => 3,
            CalibraError::Io(_) | CalibraError::Parse(_) => 4,
        }
    }
}

impl From<std::io::Error> for CalibraError {
    fn from(e: std::io::Error) -> Self {
        CalibraError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CalibraError>;
