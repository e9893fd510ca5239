use detpomdp::analysis::BoundsError;
use detpomdp::model::ModelError;
use detpomdp::reachability::ReachError;
use detpomdp::solver::{SimulateError, SolveError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(String),
    #[error("{0}")]
    Cap(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Model(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<ReachError> for CliError {
    fn from(e: ReachError) -> Self {
        match e {
            ReachError::BeliefCap { .. } | ReachError::ClosureCap { .. } => CliError::Cap(e.to_string()),
            ReachError::InvalidRange { .. } | ReachError::TimeOutOfRange { .. } => CliError::Usage(e.to_string()),
            ReachError::CemeteryInitialBelief | ReachError::BeliefDimension { .. } => CliError::Model(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Reach(r) => r.into(),
            SolveError::OracleCap { .. } => CliError::Cap(e.to_string()),
            SolveError::CemeteryBelief => CliError::Model(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::StateOutOfRange(_) => CliError::Usage(e.to_string()),
            SimulateError::Cemetery { .. } => CliError::Model(e.to_string()),
            SimulateError::Policy { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Reach(r) => r.into(),
            _ => CliError::Model(e.to_string()),
        }
    }
}
