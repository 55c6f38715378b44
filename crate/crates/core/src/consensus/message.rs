use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::Encoder;
use crate::crypto::{self, Digest, PrivateKey, PublicKey, Signature};
use crate::ledger::Block;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatorId(pub u32);

impl ValidatorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "validator {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    PrePrepare,
    Prepare,
    Commit,
}

impl Phase {
    fn tag(self) -> u8 {
        match self {
            Phase::PrePrepare => 0,
            Phase::Prepare => 1,
            Phase::Commit => 2,
        }
    }
}

/// A signed PBFT vote. PrePrepare messages also carry the proposed block;
/// the body is bound to the signature through `block_digest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusMessage {
    pub phase: Phase,
    pub view: u64,
    pub sequence: u64,
    pub block_digest: Digest,
    pub sender: ValidatorId,
    pub signature: Signature,
    pub block: Option<Block>,
}

impl ConsensusMessage {
    pub fn signing_bytes(
        phase: Phase,
        view: u64,
        sequence: u64,
        digest: &Digest,
        sender: ValidatorId,
    ) -> Vec<u8> {
        let mut enc = Encoder::with_domain("bcdn/pbft");
        enc.u8(phase.tag())
            .u64(view)
            .u64(sequence)
            .fixed(digest.as_bytes())
            .u32(sender.0);
        enc.finish()
    }

    pub fn signed(
        phase: Phase,
        view: u64,
        sequence: u64,
        block_digest: Digest,
        sender: ValidatorId,
        key: &PrivateKey,
    ) -> Self {
        let bytes = Self::signing_bytes(phase, view, sequence, &block_digest, sender);
        ConsensusMessage {
            phase,
            view,
            sequence,
            block_digest,
            sender,
            signature: crypto::sign(key, &bytes),
            block: None,
        }
    }

    pub fn with_block(mut self, block: Block) -> Self {
        self.block = Some(block);
        self
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        let bytes = Self::signing_bytes(
            self.phase,
            self.view,
            self.sequence,
            &self.block_digest,
            self.sender,
        );
        crypto::verify(key, &bytes, &self.signature)
    }
}
