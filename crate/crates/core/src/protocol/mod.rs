//! Registration, the V1/V2/V3 handshake and the smart-contract lifecycle,
//! driven against the ledger through a [`Bcn`] facade.

mod accounts;
pub mod auth;
mod bcn;
mod contract;
mod transcript;

use thiserror::Error;

use crate::consensus::{ConsensusError, ValidatorId};
use crate::ledger::LedgerError;

pub use accounts::{CpAccount, UserAccount};
pub use auth::{
    auth_confirm, auth_finalize, auth_initiate, auth_initiate_with, auth_respond, AuthFailure,
    AuthMessage, AuthSession, AuthState, Nonce, Side,
};
pub use bcn::{Bcn, BcnConfig, CommitMode};
pub use contract::{ContractFailure, ContractFailureReason, ContractState, SmartContract};
pub use transcript::{Transcript, TranscriptLine};

#[derive(Debug, Error)]
pub enum BcnError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error("{0} is not a ledger node")]
    UnknownNode(ValidatorId),
}

impl BcnError {
    pub fn reject_reason(&self) -> Option<&crate::ledger::RejectReason> {
        match self {
            BcnError::Ledger(e) => e.reject_reason(),
            _ => None,
        }
    }
}
