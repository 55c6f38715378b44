use serde::Serialize;
use thiserror::Error;

use super::BcnError;
use crate::crypto::VirtualIdentity;
use crate::ids::{ContractId, CpId};
use crate::ledger::{Service, Transaction};

/// Lifecycle of a subscription. States only ever advance in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ContractState {
    Requested,
    PaymentRequested,
    Paid,
    Delivered,
    Committed,
}

impl ContractState {
    pub fn next(self) -> Option<ContractState> {
        use ContractState::*;
        match self {
            Requested => Some(PaymentRequested),
            PaymentRequested => Some(Paid),
            Paid => Some(Delivered),
            Delivered => Some(Committed),
            Committed => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmartContract {
    pub contract_id: ContractId,
    pub vid: VirtualIdentity,
    pub cp_id: CpId,
    pub service: Service,
    pub fee: u64,
    pub state: ContractState,
    /// Ledger time at which the record was bound; set on delivery.
    pub timestamp: Option<u64>,
}

impl SmartContract {
    pub fn new(
        contract_id: ContractId,
        vid: VirtualIdentity,
        cp_id: CpId,
        service: Service,
        fee: u64,
    ) -> Self {
        SmartContract {
            contract_id,
            vid,
            cp_id,
            service,
            fee,
            state: ContractState::Requested,
            timestamp: None,
        }
    }

    /// Moves to the successor state.
    pub(crate) fn advance(&mut self) {
        self.state = self
            .state
            .next()
            .expect("committed contracts do not advance");
    }

    pub fn payment_tx(&self) -> Transaction {
        Transaction::Payment {
            contract_id: self.contract_id,
            vid: self.vid,
            cp_id: self.cp_id,
            amount: self.fee,
        }
    }

    pub fn record_tx(&self, timestamp: u64) -> Transaction {
        Transaction::ContractRecord {
            contract_id: self.contract_id,
            vid: self.vid,
            cp_id: self.cp_id,
            service: self.service.clone(),
            timestamp,
        }
    }
}

#[derive(Debug, Error)]
pub enum ContractFailureReason {
    #[error("session is not authenticated")]
    NotAuthenticated,
    #[error("virtual identity is not registered")]
    UnknownVid,
    #[error("{0} is not registered")]
    UnknownCp(CpId),
    #[error("service belongs to {owner}, not {cp_id}")]
    ServiceOwner { cp_id: CpId, owner: CpId },
    #[error("balance {balance} is below the fee {fee}")]
    InsufficientBalance { balance: u64, fee: u64 },
    #[error("commit failed: {0}")]
    Commit(#[from] BcnError),
}

/// A contract that stopped before `Committed`, with the reason.
#[derive(Debug, Error)]
#[error("{} halted in {:?}: {reason}", contract.contract_id, contract.state)]
pub struct ContractFailure {
    pub contract: Box<SmartContract>,
    pub reason: ContractFailureReason,
}
