//! Simplified PBFT among simulated validators: three-phase agreement on
//! each next block, timer-driven view change, and fault injection.

mod cluster;
mod message;
mod network;
mod validator;

use thiserror::Error;

use crate::ledger::LedgerError;

pub use cluster::{
    write_event_log, Cluster, ClusterStats, ConsensusConfig, ConsensusEvent, Decision, EventPhase,
};
pub use message::{ConsensusMessage, Phase, ValidatorId};
pub use network::{NetworkConfig, SimulatedNetwork};
pub use validator::{Behavior, Validator, ValidatorStats};

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("{0} validators is not of the form 3f + 1")]
    BadSize(u32),
    #[error("fault assigned to unknown validator {0}")]
    UnknownValidator(u32),
    #[error("invalid network parameters: {0}")]
    BadNetwork(String),
    #[error("protocol violation: {caller} is not the primary of view {view} ({expected} is)")]
    NotPrimary {
        caller: ValidatorId,
        view: u64,
        expected: ValidatorId,
    },
    #[error("sequence {0} is still being agreed on")]
    Busy(u64),
    #[error("proposed block fails ledger validation: {0}")]
    InvalidBlock(#[source] LedgerError),
    #[error("no decision on sequence {sequence} after {ticks} ticks")]
    Stalled { sequence: u64, ticks: u64 },
    #[error(transparent)]
    Ledger(LedgerError),
}
