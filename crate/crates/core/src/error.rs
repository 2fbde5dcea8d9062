use thiserror::Error;

use crate::geometry::RegionId;

/// Errors produced by the planning, refraction and verification machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative duration {0}")]
    NegativeDuration(f64),

    #[error("region {id}: {reason}")]
    InvalidRegion { id: RegionId, reason: String },

    #[error("invalid region map: {0}")]
    InvalidMap(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate crossing: {0}")]
    DegenerateCrossing(String),

    #[error("total internal reflection: |v_out/v_in * sin(theta_in)| = {ratio} > 1")]
    TotalInternalReflection { ratio: f64 },

    #[error("angular-rate bounds differ ({u_in} vs {u_out}); not a common-rate crossing")]
    NotStarCase { u_in: f64, u_out: f64 },

    #[error("malformed subpath: {0}")]
    MalformedSubpath(String),

    #[error("no feasible path found")]
    NoFeasiblePath,

    #[error("region-sequence enumeration exceeded the cap of {cap}")]
    SequenceBudgetExceeded { cap: usize },

    #[error("adjoint reconstruction failed: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ReconstructionFailed { residual: f64, tolerance: f64 },

    #[error("trajectory left the region map at t = {t}")]
    LeftDomain { t: f64 },

    #[error("no feasible schedule found within the search budget")]
    NoFeasibleFound,

    #[error("invalid control schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
