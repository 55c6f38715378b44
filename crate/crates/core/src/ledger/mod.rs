//! Append-only, hash-chained ledger of registrations, payments and contract
//! records. This is the public database providers read their request
//! history from.

mod block;
mod chain;
pub mod io;
mod mempool;
mod transaction;

use thiserror::Error;

use crate::codec::DecodeError;
use crate::crypto::VirtualIdentity;
use crate::ids::{ContractId, CpId};

pub use block::{decode_blocks, encode_blocks, verify_blocks, verify_encoded, Block};
pub use chain::{Chain, CpRecord, HistoryEntry, HistoryRequest};
pub use mempool::{Mempool, DEFAULT_BLOCK_INTERVAL};
pub use transaction::{user_registration_message, ContentMetadata, Service, Transaction, TxId};

/// Why a single transaction was refused.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RejectReason {
    #[error("node enrollment is only allowed in the genesis block")]
    EnrollmentOutsideGenesis,
    #[error("node {0} already enrolled")]
    DuplicateNode(u32),
    #[error("unknown blockchain node {0}")]
    UnknownNode(u32),
    #[error("{0} is already registered")]
    DuplicateCp(CpId),
    #[error("{0} is not registered")]
    UnknownCp(CpId),
    #[error("virtual identity is not the hash of the public key")]
    VidMismatch,
    #[error("virtual identity {0:?} already registered")]
    DuplicateVid(VirtualIdentity),
    #[error("virtual identity {0:?} is not registered")]
    UnknownVid(VirtualIdentity),
    #[error("node signature does not verify")]
    BadNodeSignature,
    #[error("{0} already has a payment")]
    DuplicatePayment(ContractId),
    #[error("{0} has no committed payment")]
    MissingPayment(ContractId),
    #[error("payment for {0} was made by a different user or to a different provider")]
    PaymentMismatch(ContractId),
    #[error("{0} is already recorded")]
    DuplicateContract(ContractId),
    #[error("{contract} names content owned by {owner}")]
    ServiceOwner { contract: ContractId, owner: CpId },
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("transaction {position} ({kind}) rejected: {reason}")]
    Rejected {
        position: usize,
        kind: &'static str,
        reason: RejectReason,
    },
    #[error("block index {found}, expected {expected}")]
    BadIndex { expected: u64, found: u64 },
    #[error("block {0} does not link to the chain tip")]
    BadLink(u64),
    #[error("block {0} digest does not recompute")]
    BadDigest(u64),
    #[error("block timestamp {found} precedes previous block at {previous}")]
    TimestampRegression { previous: u64, found: u64 },
    #[error("{0} is not an authenticated registered provider")]
    Unauthorized(CpId),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LedgerError {
    pub fn reject_reason(&self) -> Option<&RejectReason> {
        match self {
            LedgerError::Rejected { reason, .. } => Some(reason),
            _ => None,
        }
    }
}
