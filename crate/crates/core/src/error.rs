use thiserror::Error;

use crate::params::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field gradient eta is zero: no diamagnetic trap, supply an explicit t_close")]
    DegenerateField,

    #[error("trap frequency is zero: trajectories are unbounded")]
    UnboundedTrajectory,

    #[error("Feshbach projection requires a non-zero zero-field splitting D")]
    ProjectionInvalid,

    #[error("invalid configuration:\n{0}")]
    InvalidConfig(ValidationReport),

    #[error("integration diverged after t = {last_good_time:e} s")]
    Diverged { last_good_time: f64 },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
