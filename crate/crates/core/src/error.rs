use thiserror::Error;

use crate::ascent::AscentTrace;
use crate::dynamics::SimTimeline;
use crate::lp::{LpError, LpStatus};
use crate::mcfp::VerificationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid capacity model: {0}")]
    InvalidModel(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("flow LP reported status {0}")]
    NotOptimal(LpStatus),
    #[error("flow solution failed verification: {0}")]
    Verification(Box<VerificationReport>),
    #[error("ascent stopped after {} recorded iterations: {source}", trace.records.len())]
    Ascent {
        source: Box<Error>,
        trace: Box<AscentTrace>,
    },
    #[error("simulation stopped after {} snapshots: {source}", timeline.snapshots.len())]
    Simulation {
        source: Box<Error>,
        timeline: Box<SimTimeline>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The innermost cause, looking through ascent/simulation wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Ascent { source, .. } | Error::Simulation { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical engine rather than of the input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::Lp(_) | Error::NotOptimal(_) | Error::Verification(_)
        )
    }
}
